#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace mrta {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point2&) const = default;
};

inline double distance(const Point2& a, const Point2& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

// (seed, ordinal) pair; serialized as "seed:ordinal" so datasets are
// self-describing.
struct WorldId {
  std::uint64_t seed = 0;
  std::uint32_t ordinal = 0;

  std::string str() const;
  static WorldId parse(const std::string& s);
  bool operator==(const WorldId&) const = default;
};

struct WorldInstance {
  WorldId id;
  double workspace_side = 0.0;
  std::vector<Point2> agents;
  std::vector<Point2> tasks;
  int capacity = 0;  // L_t, per-agent route limit

  int n_agents() const { return static_cast<int>(agents.size()); }
  int n_tasks() const { return static_cast<int>(tasks.size()); }
  double diagonal() const { return workspace_side * std::sqrt(2.0); }
  bool coverable() const {
    return static_cast<long long>(n_agents()) * capacity >= n_tasks();
  }

  // Throws std::invalid_argument if any instance invariant is broken.
  void validate() const;
};

// Ordered open route of task indices for one agent. Traversal starts at the
// agent's position; there is no return leg.
struct Path {
  int owner = 0;
  std::vector<int> tasks;

  bool operator==(const Path&) const = default;
};

struct IntRange {
  int lo = 0, hi = 0;
};
struct RealRange {
  double lo = 0.0, hi = 0.0;
};

// fixed <= 0 selects the default rule L_t = N_t (capacity never binds).
struct CapacityRule {
  int fixed = 0;
};

WorldInstance generate_world(std::uint64_t seed, std::uint32_t ordinal,
                             int n_agents, IntRange task_count,
                             RealRange side, CapacityRule capacity = {});

double path_length(const Point2& agent_pos, const Path& path,
                   const WorldInstance& world);

struct Insertion {
  int position = 0;
  double delta = 0.0;
};

// Slot minimizing the route-length increase, ties to the smallest slot.
// Throws std::invalid_argument if the task is already routed and
// std::length_error if the path is at capacity.
Insertion cheapest_insertion(const Point2& agent_pos, const Path& path,
                             int task, const WorldInstance& world);

// Same geometry without the duplicate/capacity guards; used for feature
// construction and heuristics.
Insertion cheapest_insertion_unchecked(const Point2& agent_pos,
                                       const std::vector<int>& route, int task,
                                       const WorldInstance& world);

void save_worlds_jsonl(const std::filesystem::path& path,
                       const std::vector<WorldInstance>& worlds);
std::vector<WorldInstance> load_worlds_jsonl(const std::filesystem::path& path);

}  // namespace mrta
