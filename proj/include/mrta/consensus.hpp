#pragma once

#include <optional>
#include <vector>

#include "mrta/world.hpp"

namespace mrta {

class Bidder;

inline constexpr int kNoWinner = -1;

// Per-agent CBBA state. The bundle records tasks in the order they were won;
// the path is the execution order, maintained by cheapest insertion.
struct AgentState {
  int agent_id = 0;
  std::vector<double> winning_bids;  // y_i, one per task, >= 0
  std::vector<int> winners;          // z_i, agent index or kNoWinner
  std::vector<int> bundle;           // b_i
  Path path;                         // p_i
  std::vector<double> timestamps;    // s_i, last-information time per agent

  static AgentState fresh(int agent_id, const WorldInstance& world);
};

// Throws std::logic_error naming the first violated state invariant.
void validate_agent_state(const AgentState& state, const WorldInstance& world);

struct Message {
  int sender = 0;
  std::vector<double> winning_bids;
  std::vector<int> winners;
  std::vector<double> timestamps;

  static Message from(const AgentState& state, double now);
};

struct Topology {
  // neighbors[i] = agents whose messages agent i receives
  std::vector<std::vector<int>> neighbors;

  static Topology complete(int n_agents);
};

struct RunConfig {
  int max_iterations = 50;
  int convergence_window = 1;  // unchanged rounds required to declare done
  std::optional<Topology> topology;  // default: complete graph
  bool record_trajectory = true;
  bool validate = false;  // run the state validator after every transition
};

struct RoundSnapshot {
  int iteration = 0;
  std::vector<AgentState> states;  // post-round
};

struct RunResult {
  std::vector<Path> assignment;
  int iterations_used = 0;
  bool timed_out = false;
  std::vector<RoundSnapshot> trajectory;
};

// Replaces entries at bundle positions with -inf so they can never win a
// selection.
std::vector<double> mask_bundle_bids(std::vector<double> bids,
                                     const std::vector<int>& bundle);

// Phase 1: one bundle-construction pass for a single agent.
void build_bundle(AgentState& state, const WorldInstance& world, Bidder& bidder,
                  int iteration);

// Drops the bundle entry at bundle_index and everything won after it. Entries
// still believed self-owned are reset to (kNoWinner, 0); entries the conflict
// resolution already reassigned keep their new owner.
void release_from(AgentState& state, int bundle_index);

// Phase 2: applies the CBBA update/reset/leave decision table for one
// received message, then releases from the earliest lost bundle slot.
void resolve_conflicts(AgentState& receiver, const Message& msg, double now);

RunResult run_allocation(const WorldInstance& world, Bidder& bidder,
                         const RunConfig& config);

double team_distance(const std::vector<AgentState>& states,
                     const WorldInstance& world);
int covered_tasks(const std::vector<AgentState>& states,
                  const WorldInstance& world);

// Post-convergence checks: per-task single ownership and identical (y, z)
// everywhere. Throws std::logic_error on violation.
void validate_convergence(const std::vector<AgentState>& states,
                          const WorldInstance& world);

}  // namespace mrta
