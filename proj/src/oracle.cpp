#include "mrta/oracle.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "json.hpp"
#include "mrta/io.hpp"
#include "mrta/rng.hpp"

namespace mrta {

namespace {

constexpr double kTieEps = 1e-9;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct DistanceTable {
  int n_u = 0, n_t = 0;
  std::vector<double> at;  // agent x task
  std::vector<double> tt;  // task x task

  explicit DistanceTable(const WorldInstance& w)
      : n_u(w.n_agents()), n_t(w.n_tasks()) {
    at.resize(static_cast<std::size_t>(n_u) * n_t);
    tt.resize(static_cast<std::size_t>(n_t) * n_t);
    for (int i = 0; i < n_u; ++i)
      for (int j = 0; j < n_t; ++j)
        at[static_cast<std::size_t>(i) * n_t + j] = distance(w.agents[i], w.tasks[j]);
    for (int a = 0; a < n_t; ++a)
      for (int b = 0; b < n_t; ++b)
        tt[static_cast<std::size_t>(a) * n_t + b] = distance(w.tasks[a], w.tasks[b]);
  }

  double agent_task(int i, int j) const {
    return at[static_cast<std::size_t>(i) * n_t + j];
  }
  double task_task(int a, int b) const {
    return tt[static_cast<std::size_t>(a) * n_t + b];
  }
};

double route_cost(const DistanceTable& d, int agent, const std::vector<int>& route) {
  if (route.empty()) return 0.0;
  double c = d.agent_task(agent, route[0]);
  for (std::size_t k = 1; k < route.size(); ++k)
    c += d.task_task(route[k - 1], route[k]);
  return c;
}

std::vector<int> encode_routes(const std::vector<std::vector<int>>& routes) {
  std::vector<int> enc;
  for (const auto& r : routes) {
    enc.insert(enc.end(), r.begin(), r.end());
    enc.push_back(-1);
  }
  return enc;
}

OptimalAssignment make_assignment(const WorldInstance& w,
                                  const std::vector<std::vector<int>>& routes,
                                  double cost, bool exact) {
  OptimalAssignment a;
  a.routes.reserve(w.n_agents());
  for (int i = 0; i < w.n_agents(); ++i)
    a.routes.push_back(Path{i, routes[i]});
  a.total_distance = cost;
  a.exact = exact;
  return a;
}

// ---------------------------------------------------------------------------
// best_known: multi-start cheapest insertion + relocate/swap/2-opt descent

struct Solution {
  std::vector<std::vector<int>> routes;
  double cost = 0.0;
};

double solution_cost(const DistanceTable& d, const std::vector<std::vector<int>>& routes) {
  double c = 0.0;
  for (int i = 0; i < static_cast<int>(routes.size()); ++i)
    c += route_cost(d, i, routes[i]);
  return c;
}

double insertion_delta(const DistanceTable& d, int agent,
                       const std::vector<int>& route, int task, int slot) {
  const int m = static_cast<int>(route.size());
  const double prev = slot == 0 ? d.agent_task(agent, task)
                                : d.task_task(route[slot - 1], task);
  if (slot == m) return prev;
  const double next = d.task_task(task, route[slot]);
  const double removed = slot == 0 ? d.agent_task(agent, route[0])
                                   : d.task_task(route[slot - 1], route[slot]);
  return prev + next - removed;
}

struct BestSlot {
  int agent = -1, slot = -1;
  double delta = kInf;
};

BestSlot best_insertion(const DistanceTable& d, const Solution& s, int task, int cap) {
  BestSlot best;
  for (int i = 0; i < d.n_u; ++i) {
    const auto& route = s.routes[i];
    if (static_cast<int>(route.size()) >= cap) continue;
    for (int slot = 0; slot <= static_cast<int>(route.size()); ++slot) {
      const double delta = insertion_delta(d, i, route, task, slot);
      if (delta < best.delta) best = {i, slot, delta};
    }
  }
  return best;
}

Solution greedy_insertion(const WorldInstance& w, const DistanceTable& d, Rng* rng) {
  Solution s;
  s.routes.assign(w.n_agents(), {});
  std::vector<int> pending(w.n_tasks());
  for (int j = 0; j < w.n_tasks(); ++j) pending[j] = j;

  while (!pending.empty()) {
    // rank pending tasks by their cheapest feasible insertion
    struct Cand {
      int task_pos;
      BestSlot slot;
    };
    std::vector<Cand> cands;
    cands.reserve(pending.size());
    for (int p = 0; p < static_cast<int>(pending.size()); ++p)
      cands.push_back({p, best_insertion(d, s, pending[p], w.capacity)});
    std::sort(cands.begin(), cands.end(), [&](const Cand& a, const Cand& b) {
      if (a.slot.delta != b.slot.delta) return a.slot.delta < b.slot.delta;
      return pending[a.task_pos] < pending[b.task_pos];
    });
    int pick = 0;
    if (rng && cands.size() > 1) {
      const int k = std::min<int>(3, static_cast<int>(cands.size()));
      pick = static_cast<int>(rng->uniform_int(0, k - 1));
    }
    const Cand& c = cands[pick];
    if (c.slot.agent < 0) break;  // capacity exhausted, leave rest uncovered
    auto& route = s.routes[c.slot.agent];
    route.insert(route.begin() + c.slot.slot, pending[c.task_pos]);
    pending.erase(pending.begin() + c.task_pos);
  }
  s.cost = solution_cost(d, s.routes);
  return s;
}

// first-improvement passes until a full sweep finds nothing
void local_search(const WorldInstance& w, const DistanceTable& d, Solution& s) {
  const int n_u = w.n_agents();
  bool improved = true;
  while (improved) {
    improved = false;

    // relocate: move one task anywhere else
    for (int a = 0; a < n_u && !improved; ++a) {
      for (int pos = 0; pos < static_cast<int>(s.routes[a].size()) && !improved; ++pos) {
        const int task = s.routes[a][pos];
        std::vector<int> reduced = s.routes[a];
        reduced.erase(reduced.begin() + pos);
        const double gain = route_cost(d, a, s.routes[a]) - route_cost(d, a, reduced);
        for (int b = 0; b < n_u && !improved; ++b) {
          const auto& target = b == a ? reduced : s.routes[b];
          if (b != a && static_cast<int>(target.size()) >= w.capacity) continue;
          for (int slot = 0; slot <= static_cast<int>(target.size()); ++slot) {
            if (b == a && slot == pos) continue;
            const double delta = insertion_delta(d, b, target, task, slot);
            if (delta < gain - 1e-12) {
              s.routes[a] = reduced;
              auto& dst = s.routes[b];
              dst.insert(dst.begin() + slot, task);
              improved = true;
              break;
            }
          }
        }
      }
    }
    if (improved) continue;

    // swap: exchange tasks between two positions
    for (int a = 0; a < n_u && !improved; ++a) {
      for (int b = a; b < n_u && !improved; ++b) {
        for (int pa = 0; pa < static_cast<int>(s.routes[a].size()) && !improved; ++pa) {
          const int qb_start = a == b ? pa + 1 : 0;
          for (int pb = qb_start; pb < static_cast<int>(s.routes[b].size()); ++pb) {
            const double before = route_cost(d, a, s.routes[a]) +
                                  (a == b ? 0.0 : route_cost(d, b, s.routes[b]));
            std::swap(s.routes[a][pa], s.routes[b][pb]);
            const double after = route_cost(d, a, s.routes[a]) +
                                 (a == b ? 0.0 : route_cost(d, b, s.routes[b]));
            if (after < before - 1e-12) {
              improved = true;
              break;
            }
            std::swap(s.routes[a][pa], s.routes[b][pb]);
          }
        }
      }
    }
    if (improved) continue;

    // 2-opt: reverse a segment within a route
    for (int a = 0; a < n_u && !improved; ++a) {
      auto& route = s.routes[a];
      const int m = static_cast<int>(route.size());
      for (int p = 0; p < m - 1 && !improved; ++p) {
        for (int q = p + 1; q < m; ++q) {
          const double before = route_cost(d, a, route);
          std::reverse(route.begin() + p, route.begin() + q + 1);
          const double after = route_cost(d, a, route);
          if (after < before - 1e-12) {
            improved = true;
            break;
          }
          std::reverse(route.begin() + p, route.begin() + q + 1);
        }
      }
    }
  }
  s.cost = solution_cost(d, s.routes);
}

}  // namespace

std::vector<int> OptimalAssignment::owners(int n_tasks) const {
  std::vector<int> owner(n_tasks, kNoOwner);
  for (const auto& r : routes)
    for (int t : r.tasks)
      if (t >= 0 && t < n_tasks) owner[t] = r.owner;
  return owner;
}

OptimalAssignment best_known(const WorldInstance& world, std::uint64_t seed,
                             int restarts) {
  if (restarts < 1) throw std::invalid_argument("best_known: restarts < 1");
  const DistanceTable d(world);
  Solution best;
  std::vector<int> best_enc;
  bool have = false;
  for (int r = 0; r < restarts; ++r) {
    Rng rng(derive_seed(seed, "best-known", static_cast<std::uint64_t>(r)));
    Solution s = greedy_insertion(world, d, r == 0 ? nullptr : &rng);
    local_search(world, d, s);
    auto enc = encode_routes(s.routes);
    if (!have || s.cost < best.cost - kTieEps ||
        (s.cost <= best.cost + kTieEps && enc < best_enc)) {
      best = s;
      best_enc = std::move(enc);
      have = true;
    }
  }
  return make_assignment(world, best.routes, best.cost, false);
}

namespace {

// ---------------------------------------------------------------------------
// exact branch-and-bound over (assignment, order)
//
// Routes are fixed agent by agent; within the active agent the route extends
// only at its end, so every (partition, order) pair is generated exactly once.

struct ExactSearch {
  const WorldInstance& w;
  DistanceTable d;
  SolverBudget budget;
  int n_u, n_t, cap;
  std::vector<std::vector<int>> nbr;      // per task: other tasks by distance
  std::vector<double> min_future;         // [i*n_t + t]: min over agents >= i
  std::vector<std::vector<int>> routes;
  double best_cost = kInf;
  std::vector<int> best_enc;
  std::vector<std::vector<int>> best_routes;
  long long nodes = 0;
  bool aborted = false;
  std::chrono::steady_clock::time_point t_start;

  explicit ExactSearch(const WorldInstance& world, const SolverBudget& b)
      : w(world), d(world), budget(b), n_u(world.n_agents()),
        n_t(world.n_tasks()), cap(world.capacity) {
    nbr.resize(n_t);
    for (int t = 0; t < n_t; ++t) {
      for (int o = 0; o < n_t; ++o)
        if (o != t) nbr[t].push_back(o);
      std::sort(nbr[t].begin(), nbr[t].end(), [&](int a, int b) {
        const double da = d.task_task(a, t), db = d.task_task(b, t);
        if (da != db) return da < db;
        return a < b;
      });
    }
    min_future.assign(static_cast<std::size_t>(n_u + 1) * n_t, kInf);
    for (int i = n_u - 1; i >= 0; --i)
      for (int t = 0; t < n_t; ++t)
        min_future[static_cast<std::size_t>(i) * n_t + t] =
            std::min(min_future[static_cast<std::size_t>(i + 1) * n_t + t],
                     d.agent_task(i, t));
    routes.assign(n_u, {});
    t_start = std::chrono::steady_clock::now();
  }

  bool over_budget() {
    if (budget.max_nodes > 0 && nodes > budget.max_nodes) return true;
    if (budget.time_limit_ms > 0 && (nodes & 1023) == 0) {
      const auto now = std::chrono::steady_clock::now();
      const double ms =
          std::chrono::duration<double, std::milli>(now - t_start).count();
      if (ms > budget.time_limit_ms) return true;
    }
    return false;
  }

  // Sum over remaining tasks of the cheapest possible entry edge. Entry
  // candidates: the active route end (when it may still extend), any agent
  // start from `first_future` on, and any other remaining task.
  double completion_bound(std::uint64_t remaining, int active_end_task,
                          bool active_extends, int first_future) {
    if (remaining == 0) return 0.0;
    const double* fut =
        &min_future[static_cast<std::size_t>(std::min(first_future, n_u)) * n_t];
    double sum = 0.0;
    for (std::uint64_t m = remaining; m;) {
      const int t = std::countr_zero(m);
      m &= m - 1;
      double e = fut[t];
      if (active_extends)
        e = std::min(e, active_end_task < 0 ? kInf : d.task_task(active_end_task, t));
      for (int o : nbr[t]) {
        if (remaining & (1ULL << o)) {
          e = std::min(e, d.task_task(o, t));
          break;
        }
      }
      if (e == kInf) return kInf;
      sum += e;
    }
    return sum;
  }

  // like above but the active route is still empty: entry from agent i start
  double completion_bound_fresh(std::uint64_t remaining, int active_agent) {
    if (remaining == 0) return 0.0;
    const double* fut =
        &min_future[static_cast<std::size_t>(active_agent) * n_t];
    double sum = 0.0;
    for (std::uint64_t m = remaining; m;) {
      const int t = std::countr_zero(m);
      m &= m - 1;
      double e = fut[t];
      for (int o : nbr[t]) {
        if (remaining & (1ULL << o)) {
          e = std::min(e, d.task_task(o, t));
          break;
        }
      }
      sum += e;
    }
    return sum;
  }

  void candidate(double cost) {
    if (cost < best_cost - kTieEps) {
      best_cost = cost;
      best_routes = routes;
      best_enc = encode_routes(routes);
      return;
    }
    if (cost <= best_cost + kTieEps) {
      auto enc = encode_routes(routes);
      if (best_enc.empty() || enc < best_enc) {
        best_cost = std::min(best_cost, cost);
        best_routes = routes;
        best_enc = std::move(enc);
      }
    }
  }

  void dfs(int agent, double acc, std::uint64_t remaining) {
    if (aborted) return;
    if (agent == n_u) {
      if (remaining == 0) candidate(acc);
      return;
    }
    ++nodes;
    if (over_budget()) {
      aborted = true;
      return;
    }

    const int used = static_cast<int>(routes[agent].size());
    const int rem_count = std::popcount(remaining);

    // close this route and hand the rest to later agents
    if (static_cast<long long>(n_u - agent - 1) * cap >= rem_count) {
      const double bound =
          acc + (agent + 1 < n_u ? completion_bound_fresh(remaining, agent + 1)
                                 : (remaining ? kInf : 0.0));
      if (bound < best_cost + kTieEps) {
        dfs(agent + 1, acc, remaining);
        if (aborted) return;
      }
    }

    if (used >= cap || remaining == 0) return;

    const int last = routes[agent].empty() ? -1 : routes[agent].back();
    struct Child {
      int task;
      double step;
    };
    Child children[64];
    int n_children = 0;
    for (std::uint64_t m = remaining; m;) {
      const int t = std::countr_zero(m);
      m &= m - 1;
      const double step =
          last < 0 ? d.agent_task(agent, t) : d.task_task(last, t);
      children[n_children++] = {t, step};
    }
    std::sort(children, children + n_children, [](const Child& a, const Child& b) {
      if (a.step != b.step) return a.step < b.step;
      return a.task < b.task;
    });

    for (int k = 0; k < n_children; ++k) {
      const int t = children[k].task;
      const std::uint64_t nr = remaining & ~(1ULL << t);
      const double acc2 = acc + children[k].step;
      const bool extends = used + 1 < cap;
      const double bound =
          acc2 + completion_bound(nr, t, extends, agent + 1);
      if (bound < best_cost + kTieEps) {
        routes[agent].push_back(t);
        dfs(agent, acc2, nr);
        routes[agent].pop_back();
        if (aborted) return;
      }
    }
  }
};

}  // namespace

OptimalAssignment solve_exact(const WorldInstance& world,
                              const SolverBudget& budget, std::uint64_t seed) {
  if (world.n_tasks() > 64)
    throw std::invalid_argument("solve_exact: more than 64 tasks");
  ExactSearch search(world, budget);

  // warm incumbent so the bound prunes from the start
  OptimalAssignment warm = best_known(world, seed);
  {
    std::vector<std::vector<int>> wr;
    wr.reserve(world.n_agents());
    for (const auto& r : warm.routes) wr.push_back(r.tasks);
    int covered = 0;
    for (const auto& r : wr) covered += static_cast<int>(r.size());
    if (covered == world.n_tasks()) {
      search.routes = wr;
      search.candidate(warm.total_distance);
      search.routes.assign(world.n_agents(), {});
    }
  }

  const std::uint64_t all =
      world.n_tasks() == 64 ? ~0ULL : ((1ULL << world.n_tasks()) - 1);
  search.dfs(0, 0.0, all);

  if (search.best_routes.empty())
    throw std::runtime_error("solve_exact: no feasible assignment");
  return make_assignment(world, search.best_routes, search.best_cost,
                         !search.aborted);
}

double oracle_root_bound(const WorldInstance& world) {
  if (world.n_tasks() > 64)
    throw std::invalid_argument("oracle_root_bound: more than 64 tasks");
  ExactSearch search(world, {});
  const std::uint64_t all =
      world.n_tasks() == 64 ? ~0ULL : ((1ULL << world.n_tasks()) - 1);
  return search.completion_bound_fresh(all, 0);
}

OptimalAssignment brute_force(const WorldInstance& world) {
  const int n_t = world.n_tasks();
  const int n_u = world.n_agents();
  if (n_t > 8) throw std::invalid_argument("brute_force: more than 8 tasks");
  const DistanceTable d(world);

  // per agent, per subset: cheapest open route over all permutations
  const int n_masks = 1 << n_t;
  std::vector<std::vector<double>> cost(n_u, std::vector<double>(n_masks, kInf));
  std::vector<std::vector<std::vector<int>>> order(
      n_u, std::vector<std::vector<int>>(n_masks));
  for (int i = 0; i < n_u; ++i) {
    cost[i][0] = 0.0;
    for (int mask = 1; mask < n_masks; ++mask) {
      if (std::popcount(static_cast<unsigned>(mask)) > world.capacity) continue;
      std::vector<int> tasks;
      for (int t = 0; t < n_t; ++t)
        if (mask & (1 << t)) tasks.push_back(t);
      std::vector<int> perm = tasks;
      do {
        const double c = route_cost(d, i, perm);
        if (c < cost[i][mask]) {
          cost[i][mask] = c;
          order[i][mask] = perm;
        }
      } while (std::next_permutation(perm.begin(), perm.end()));
    }
  }

  // every way of giving each task to an agent
  std::vector<int> masks(n_u, 0);
  double best_cost = kInf;
  std::vector<int> best_enc;
  std::vector<std::vector<int>> best_routes(n_u);

  auto evaluate = [&]() {
    double total = 0.0;
    for (int i = 0; i < n_u; ++i) {
      const double c = cost[i][masks[i]];
      if (c == kInf) return;
      total += c;
    }
    if (total > best_cost + kTieEps) return;
    std::vector<std::vector<int>> routes(n_u);
    for (int i = 0; i < n_u; ++i) routes[i] = order[i][masks[i]];
    auto enc = encode_routes(routes);
    if (total < best_cost - kTieEps) {
      best_cost = total;
      best_routes = std::move(routes);
      best_enc = std::move(enc);
    } else if (best_enc.empty() || enc < best_enc) {
      best_cost = std::min(best_cost, total);
      best_routes = std::move(routes);
      best_enc = std::move(enc);
    }
  };

  auto enumerate = [&](auto&& self, int t) -> void {
    if (t == n_t) {
      evaluate();
      return;
    }
    for (int i = 0; i < n_u; ++i) {
      if (std::popcount(static_cast<unsigned>(masks[i])) >= world.capacity)
        continue;
      masks[i] |= 1 << t;
      self(self, t + 1);
      masks[i] &= ~(1 << t);
    }
  };
  enumerate(enumerate, 0);

  if (best_enc.empty() && n_t > 0)
    throw std::runtime_error("brute_force: no feasible assignment");
  return make_assignment(world, best_routes, best_cost, true);
}

OptimalAssignment solve_oracle(const WorldInstance& world,
                               const SolverBudget& budget, std::uint64_t seed) {
  if (world.n_tasks() <= budget.exact_threshold && world.n_tasks() <= 64)
    return solve_exact(world, budget, seed);
  return best_known(world, seed);
}

void validate_assignment(const OptimalAssignment& a, const WorldInstance& world) {
  if (static_cast<int>(a.routes.size()) != world.n_agents())
    throw std::invalid_argument("assignment: route count != agent count");
  std::vector<int> count(world.n_tasks(), 0);
  double total = 0.0;
  for (int i = 0; i < world.n_agents(); ++i) {
    const Path& r = a.routes[i];
    if (r.owner != i) throw std::invalid_argument("assignment: owner mismatch");
    if (static_cast<int>(r.tasks.size()) > world.capacity)
      throw std::invalid_argument("assignment: route over capacity");
    for (int t : r.tasks) {
      if (t < 0 || t >= world.n_tasks())
        throw std::invalid_argument("assignment: bad task index");
      ++count[t];
    }
    total += path_length(world.agents[i], r, world);
  }
  for (int t = 0; t < world.n_tasks(); ++t)
    if (count[t] != 1)
      throw std::invalid_argument("assignment: task " + std::to_string(t) +
                                  " covered " + std::to_string(count[t]) + " times");
  if (std::abs(total - a.total_distance) > 1e-9)
    throw std::invalid_argument("assignment: stored distance mismatch");
}

void save_oracle_cache(const std::filesystem::path& path, const OracleCache& cache) {
  atomic_write(path, [&](std::ostream& out) {
    for (const auto& [id, a] : cache) {
      nlohmann::ordered_json rec;
      rec["id"] = id;
      rec["distance"] = a.total_distance;
      rec["exact"] = a.exact;
      nlohmann::ordered_json routes = nlohmann::ordered_json::array();
      for (const auto& r : a.routes) routes.push_back(r.tasks);
      rec["routes"] = routes;
      out << rec.dump() << "\n";
    }
  });
}

OracleCache load_oracle_cache(const std::filesystem::path& path) {
  OracleCache cache;
  for (const auto& line : read_lines(path)) {
    nlohmann::json rec = nlohmann::json::parse(line);
    OptimalAssignment a;
    a.total_distance = rec.at("distance").get<double>();
    a.exact = rec.at("exact").get<bool>();
    int owner = 0;
    for (const auto& r : rec.at("routes")) {
      Path p;
      p.owner = owner++;
      for (const auto& t : r) p.tasks.push_back(t.get<int>());
      a.routes.push_back(std::move(p));
    }
    cache[rec.at("id").get<std::string>()] = std::move(a);
  }
  return cache;
}

}  // namespace mrta
