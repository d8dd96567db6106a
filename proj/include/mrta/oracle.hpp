#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mrta/world.hpp"

namespace mrta {

struct OptimalAssignment {
  std::vector<Path> routes;  // one per agent, empty routes allowed
  double total_distance = 0.0;
  bool exact = false;  // true only when the search ran to completion

  // task index -> owning agent, kNoOwner for uncovered
  std::vector<int> owners(int n_tasks) const;
};

inline constexpr int kNoOwner = -1;

struct SolverBudget {
  long long max_nodes = -1;    // <= 0: unlimited
  double time_limit_ms = -1;   // <= 0: unlimited
  int exact_threshold = 12;    // largest task count solve_oracle attempts exactly
};

// Min-sum over all partitions of tasks into per-agent ordered open routes,
// branch-and-bound with nearest-neighbor completion bounds. Returns the best
// incumbent with exact=false when the budget runs out. Requires N_t <= 64.
OptimalAssignment solve_exact(const WorldInstance& world,
                              const SolverBudget& budget = {},
                              std::uint64_t seed = 0);

// Exhaustive enumeration of every partition and within-route order.
// Refuses N_t > 8.
OptimalAssignment brute_force(const WorldInstance& world);

// Multi-start greedy insertion plus relocate/swap/2-opt local search.
// Deterministic given seed; never exact by construction.
OptimalAssignment best_known(const WorldInstance& world, std::uint64_t seed,
                             int restarts = 8);

// Dispatch: exact attempt within budget when N_t <= exact_threshold, else
// best_known.
OptimalAssignment solve_oracle(const WorldInstance& world,
                               const SolverBudget& budget, std::uint64_t seed);

// Admissible lower bound at the search root; test hook for bound soundness.
double oracle_root_bound(const WorldInstance& world);

// Throws std::invalid_argument unless every task is covered exactly once,
// capacities hold, and total_distance matches the routes.
void validate_assignment(const OptimalAssignment& a, const WorldInstance& world);

using OracleCache = std::map<std::string, OptimalAssignment>;

void save_oracle_cache(const std::filesystem::path& path, const OracleCache& cache);
OracleCache load_oracle_cache(const std::filesystem::path& path);

}  // namespace mrta
