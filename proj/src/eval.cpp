#include "mrta/eval.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "mrta/io.hpp"
#include "mrta/rng.hpp"

namespace mrta {

double percent_optimality(double d_star, double d_hat) {
  if (!(d_star > 0.0) || !(d_hat > 0.0))
    throw std::invalid_argument("percent_optimality: nonpositive distance");
  return d_star / d_hat * 100.0;
}

const std::vector<ValidationPreset>& validation_presets() {
  static const std::vector<ValidationPreset> presets = {
      {"val5", 5, {10, 20}},
      {"val10", 10, {20, 40}},
      {"val15", 15, {30, 60}},
      {"val20", 20, {40, 80}},
  };
  return presets;
}

const ValidationPreset& validation_preset(const std::string& name) {
  for (const auto& p : validation_presets())
    if (p.name == name) return p;
  throw std::invalid_argument("unknown validation preset: " + name);
}

std::vector<WorldInstance> make_validation_set(std::uint64_t seed,
                                               const ValidationPreset& preset,
                                               int count) {
  const std::uint64_t set_seed = derive_seed(seed, "validation-" + preset.name);
  std::vector<WorldInstance> worlds;
  worlds.reserve(count);
  for (int i = 0; i < count; ++i)
    worlds.push_back(generate_world(set_seed, static_cast<std::uint32_t>(i),
                                    preset.n_agents, preset.tasks, preset.sides));
  return worlds;
}

void make_validation_sets(std::uint64_t seed, const std::filesystem::path& dir,
                          int count) {
  std::filesystem::create_directories(dir);
  for (const auto& preset : validation_presets())
    save_worlds_jsonl(dir / (preset.name + ".jsonl"),
                      make_validation_set(seed, preset, count));
}

EvalRecord evaluate_run(const WorldInstance& world, const std::string& bidder,
                        const RunResult& run, const OptimalAssignment& oracle) {
  EvalRecord rec;
  rec.world_id = world.id.str();
  rec.bidder = bidder;
  rec.n_agents = world.n_agents();
  rec.n_tasks = world.n_tasks();
  rec.d_star = oracle.total_distance;
  rec.oracle_exact = oracle.exact;
  rec.iterations = run.iterations_used;
  rec.timed_out = run.timed_out;

  std::vector<char> covered(world.n_tasks(), 0);
  double d_hat = 0.0;
  for (const auto& p : run.assignment) {
    d_hat += path_length(world.agents[p.owner], p, world);
    for (int t : p.tasks) covered[t] = 1;
  }
  int n_covered = 0;
  for (char c : covered) n_covered += c;
  rec.d_hat = d_hat;
  rec.uncovered = world.n_tasks() - n_covered;
  if (rec.uncovered == 0 && d_hat > 0.0 && rec.d_star > 0.0)
    rec.eta = percent_optimality(rec.d_star, d_hat);
  return rec;
}

std::vector<EvalRecord> run_validation(const std::vector<WorldInstance>& worlds,
                                       const std::vector<const Bidder*>& bidders,
                                       const RunConfig& config,
                                       const SolverBudget& oracle_budget,
                                       OracleCache& cache, int jobs) {
  RunConfig quiet = config;
  quiet.record_trajectory = false;

  // oracle pass first so the cache mutation stays single-threaded
  for (const auto& world : worlds) {
    const std::string key = world.id.str();
    if (!cache.count(key))
      cache[key] = solve_oracle(world, oracle_budget,
                                derive_seed(fnv1a(key), "oracle-seed"));
  }

  struct Job {
    const WorldInstance* world;
    const Bidder* bidder;
  };
  std::vector<Job> grid;
  grid.reserve(worlds.size() * bidders.size());
  for (const auto* b : bidders)
    for (const auto& w : worlds) grid.push_back({&w, b});

  std::vector<EvalRecord> records(grid.size());
  const int workers = std::max(1, jobs);
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= grid.size()) break;
      const Job& job = grid[k];
      auto bidder = job.bidder->clone();
      const RunResult run = run_allocation(*job.world, *bidder, quiet);
      records[k] = evaluate_run(*job.world, bidder->name(), run,
                                cache.at(job.world->id.str()));
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  return records;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of empty set");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
  const double frac = pos - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

SummaryStats summarize(const std::vector<EvalRecord>& records) {
  if (records.empty()) throw std::invalid_argument("summarize: no records");

  std::map<std::pair<std::string, int>, std::vector<const EvalRecord*>> groups;
  for (const auto& r : records) groups[{r.bidder, r.n_agents}].push_back(&r);

  SummaryStats out;
  for (const auto& [key, recs] : groups) {
    GroupStats g;
    g.bidder = key.first;
    g.n_agents = key.second;
    g.count = static_cast<int>(recs.size());
    std::vector<double> etas;
    std::vector<double> iters;
    for (const auto* r : recs) {
      if (r->timed_out) {
        ++g.timeout_count;
        continue;
      }
      iters.push_back(static_cast<double>(r->iterations));
      g.iter_max = std::max(g.iter_max, r->iterations);
      if (r->eta) etas.push_back(*r->eta);
    }
    g.eta_count = static_cast<int>(etas.size());
    if (!etas.empty()) {
      g.eta_median = quantile(etas, 0.5);
      g.eta_q1 = quantile(etas, 0.25);
      g.eta_q3 = quantile(etas, 0.75);
    }
    if (!iters.empty()) g.iter_p95 = quantile(iters, 0.95);
    out.groups.push_back(std::move(g));
  }
  return out;
}

void export_records_csv(const std::filesystem::path& path,
                        const std::vector<EvalRecord>& records) {
  atomic_write(path, [&](std::ostream& out) {
    out << "world_id,bidder,n_agents,n_tasks,d_star,d_hat,eta,iterations,"
           "timed_out,oracle_exact\n";
    for (const auto& r : records) {
      out << r.world_id << ',' << r.bidder << ',' << r.n_agents << ','
          << r.n_tasks << ',' << format_double(r.d_star) << ','
          << format_double(r.d_hat) << ','
          << (r.eta ? format_double(*r.eta) : std::string()) << ','
          << r.iterations << ',' << (r.timed_out ? 1 : 0) << ','
          << (r.oracle_exact ? 1 : 0) << "\n";
    }
  });
}

std::vector<EvalRecord> load_records_csv(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw std::runtime_error("empty records file: " + path.string());
  std::vector<EvalRecord> records;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    std::vector<std::string> cols;
    std::string cur;
    for (char c : lines[i]) {
      if (c == ',') {
        cols.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    cols.push_back(cur);
    if (cols.size() != 10)
      throw std::runtime_error("bad records row: " + lines[i]);
    EvalRecord r;
    r.world_id = cols[0];
    r.bidder = cols[1];
    r.n_agents = std::stoi(cols[2]);
    r.n_tasks = std::stoi(cols[3]);
    r.d_star = parse_double(cols[4]);
    r.d_hat = parse_double(cols[5]);
    if (!cols[6].empty()) r.eta = parse_double(cols[6]);
    r.iterations = std::stoi(cols[7]);
    r.timed_out = cols[8] == "1";
    r.oracle_exact = cols[9] == "1";
    records.push_back(std::move(r));
  }
  return records;
}

namespace {

nlohmann::ordered_json box_data(const std::string& bidder, int n_agents,
                                std::vector<double> values) {
  nlohmann::ordered_json box;
  box["bidder"] = bidder;
  box["n_agents"] = n_agents;
  if (values.empty()) {
    box["count"] = 0;
    return box;
  }
  const double q1 = quantile(values, 0.25);
  const double med = quantile(values, 0.5);
  const double q3 = quantile(values, 0.75);
  const double iqr = q3 - q1;
  const double lo_fence = q1 - 1.5 * iqr;
  const double hi_fence = q3 + 1.5 * iqr;
  std::sort(values.begin(), values.end());
  std::vector<double> outliers;
  double whisker_lo = values.back(), whisker_hi = values.front();
  for (double v : values) {
    if (v < lo_fence || v > hi_fence) {
      outliers.push_back(v);
    } else {
      whisker_lo = std::min(whisker_lo, v);
      whisker_hi = std::max(whisker_hi, v);
    }
  }
  box["count"] = values.size();
  box["min"] = values.front();
  box["whisker_low"] = whisker_lo;
  box["q1"] = q1;
  box["median"] = med;
  box["q3"] = q3;
  box["whisker_high"] = whisker_hi;
  box["max"] = values.back();
  box["outliers"] = outliers;
  return box;
}

}  // namespace

void export_report(const SummaryStats& stats,
                   const std::vector<EvalRecord>& records,
                   const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  export_records_csv(dir / "records.csv", records);

  atomic_write(dir / "summary.csv", [&](std::ostream& out) {
    out << "bidder,n_agents,count,timeouts,eta_count,eta_median,eta_q1,eta_q3,"
           "iter_p95,iter_max\n";
    for (const auto& g : stats.groups) {
      out << g.bidder << ',' << g.n_agents << ',' << g.count << ','
          << g.timeout_count << ',' << g.eta_count << ','
          << format_double(g.eta_median) << ',' << format_double(g.eta_q1)
          << ',' << format_double(g.eta_q3) << ',' << format_double(g.iter_p95)
          << ',' << g.iter_max << "\n";
    }
  });

  std::map<std::pair<std::string, int>, std::vector<double>> etas, iters;
  for (const auto& r : records) {
    if (r.timed_out) continue;
    if (r.eta) etas[{r.bidder, r.n_agents}].push_back(*r.eta);
    iters[{r.bidder, r.n_agents}].push_back(static_cast<double>(r.iterations));
  }
  auto dump_boxes = [&](const std::filesystem::path& path,
                        const std::map<std::pair<std::string, int>,
                                       std::vector<double>>& data,
                        const std::string& metric) {
    nlohmann::ordered_json doc;
    doc["metric"] = metric;
    nlohmann::ordered_json groups = nlohmann::ordered_json::array();
    for (const auto& [key, values] : data)
      groups.push_back(box_data(key.first, key.second, values));
    doc["groups"] = groups;
    atomic_write(path, [&](std::ostream& out) { out << doc.dump(2) << "\n"; });
  };
  dump_boxes(dir / "eta_boxes.json", etas, "percent_optimality");
  dump_boxes(dir / "iterations_boxes.json", iters, "iterations");
}

}  // namespace mrta
