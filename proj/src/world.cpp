#include "mrta/world.hpp"

#include <charconv>
#include <limits>
#include <stdexcept>
#include <unordered_set>

#include "json.hpp"
#include "mrta/io.hpp"
#include "mrta/rng.hpp"

namespace mrta {

std::string WorldId::str() const {
  return std::to_string(seed) + ":" + std::to_string(ordinal);
}

WorldId WorldId::parse(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw std::invalid_argument("bad world id: " + s);
  WorldId id;
  const char* b = s.data();
  auto r1 = std::from_chars(b, b + colon, id.seed);
  auto r2 = std::from_chars(b + colon + 1, b + s.size(), id.ordinal);
  if (r1.ec != std::errc{} || r2.ec != std::errc{} ||
      r1.ptr != b + colon || r2.ptr != b + s.size())
    throw std::invalid_argument("bad world id: " + s);
  return id;
}

void WorldInstance::validate() const {
  if (!(workspace_side > 0.0) || !std::isfinite(workspace_side))
    throw std::invalid_argument("world " + id.str() + ": bad workspace side");
  if (agents.empty()) throw std::invalid_argument("world " + id.str() + ": no agents");
  if (tasks.empty()) throw std::invalid_argument("world " + id.str() + ": no tasks");
  if (capacity < 1) throw std::invalid_argument("world " + id.str() + ": capacity < 1");
  auto in_square = [&](const Point2& p) {
    return std::isfinite(p.x) && std::isfinite(p.y) && p.x >= 0.0 &&
           p.y >= 0.0 && p.x <= workspace_side && p.y <= workspace_side;
  };
  for (const auto& p : agents)
    if (!in_square(p))
      throw std::invalid_argument("world " + id.str() + ": agent outside workspace");
  for (const auto& p : tasks)
    if (!in_square(p))
      throw std::invalid_argument("world " + id.str() + ": task outside workspace");
}

WorldInstance generate_world(std::uint64_t seed, std::uint32_t ordinal,
                             int n_agents, IntRange task_count, RealRange side,
                             CapacityRule capacity) {
  if (n_agents < 1) throw std::invalid_argument("generate_world: n_agents < 1");
  if (task_count.lo > task_count.hi || task_count.lo < 1)
    throw std::invalid_argument("generate_world: empty task count range");
  if (side.lo > side.hi || side.lo <= 0.0)
    throw std::invalid_argument("generate_world: empty side range");

  Rng rng(derive_seed(seed, "world-gen", ordinal));
  WorldInstance w;
  w.id = {seed, ordinal};
  w.workspace_side = side.lo == side.hi ? side.lo : rng.uniform(side.lo, side.hi);
  const int n_tasks =
      static_cast<int>(rng.uniform_int(task_count.lo, task_count.hi));
  w.capacity = capacity.fixed > 0 ? capacity.fixed : n_tasks;
  if (static_cast<long long>(n_agents) * w.capacity < n_tasks)
    throw std::invalid_argument("generate_world: capacity cannot cover tasks");
  w.agents.reserve(n_agents);
  for (int i = 0; i < n_agents; ++i)
    w.agents.push_back({rng.uniform(0.0, w.workspace_side),
                        rng.uniform(0.0, w.workspace_side)});
  w.tasks.reserve(n_tasks);
  for (int j = 0; j < n_tasks; ++j)
    w.tasks.push_back({rng.uniform(0.0, w.workspace_side),
                       rng.uniform(0.0, w.workspace_side)});
  return w;
}

static void check_task_index(int task, const WorldInstance& world) {
  if (task < 0 || task >= world.n_tasks())
    throw std::invalid_argument("task index out of range: " + std::to_string(task));
}

double path_length(const Point2& agent_pos, const Path& path,
                   const WorldInstance& world) {
  double total = 0.0;
  Point2 at = agent_pos;
  for (int task : path.tasks) {
    check_task_index(task, world);
    total += distance(at, world.tasks[task]);
    at = world.tasks[task];
  }
  return total;
}

Insertion cheapest_insertion_unchecked(const Point2& agent_pos,
                                       const std::vector<int>& route, int task,
                                       const WorldInstance& world) {
  check_task_index(task, world);
  const Point2& q = world.tasks[task];
  const int m = static_cast<int>(route.size());
  Insertion best{0, std::numeric_limits<double>::infinity()};
  for (int n = 0; n <= m; ++n) {
    const Point2 prev = n == 0 ? agent_pos : world.tasks[route[n - 1]];
    double delta = distance(prev, q);
    if (n < m) {
      const Point2& next = world.tasks[route[n]];
      delta += distance(q, next) - distance(prev, next);
    }
    if (delta < best.delta) best = {n, delta};
  }
  // exact geometric zero can drift to -1e-17 through cancellation
  if (best.delta < 0.0) best.delta = 0.0;
  return best;
}

Insertion cheapest_insertion(const Point2& agent_pos, const Path& path,
                             int task, const WorldInstance& world) {
  check_task_index(task, world);
  for (int t : path.tasks)
    if (t == task)
      throw std::invalid_argument("task already in path: " + std::to_string(task));
  if (static_cast<int>(path.tasks.size()) >= world.capacity)
    throw std::length_error("path at capacity");
  return cheapest_insertion_unchecked(agent_pos, path.tasks, task, world);
}

void save_worlds_jsonl(const std::filesystem::path& path,
                       const std::vector<WorldInstance>& worlds) {
  atomic_write(path, [&](std::ostream& out) {
    for (const auto& w : worlds) {
      nlohmann::ordered_json rec;
      rec["id"] = w.id.str();
      rec["workspace_side"] = w.workspace_side;
      rec["capacity"] = w.capacity;
      auto points = [](const std::vector<Point2>& ps) {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (const auto& p : ps) arr.push_back({p.x, p.y});
        return arr;
      };
      rec["agents"] = points(w.agents);
      rec["tasks"] = points(w.tasks);
      out << rec.dump() << "\n";
    }
  });
}

std::vector<WorldInstance> load_worlds_jsonl(const std::filesystem::path& path) {
  std::vector<WorldInstance> worlds;
  std::unordered_set<std::string> seen;
  for (const auto& line : read_lines(path)) {
    nlohmann::json rec = nlohmann::json::parse(line);
    WorldInstance w;
    w.id = WorldId::parse(rec.at("id").get<std::string>());
    w.workspace_side = rec.at("workspace_side").get<double>();
    w.capacity = rec.at("capacity").get<int>();
    for (const auto& p : rec.at("agents"))
      w.agents.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    for (const auto& p : rec.at("tasks"))
      w.tasks.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    w.validate();
    if (!seen.insert(w.id.str()).second)
      throw std::invalid_argument("duplicate world id: " + w.id.str());
    worlds.push_back(std::move(w));
  }
  return worlds;
}

}  // namespace mrta
