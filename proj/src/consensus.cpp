#include "mrta/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_set>

#include "mrta/bidding.hpp"

namespace mrta {

AgentState AgentState::fresh(int agent_id, const WorldInstance& world) {
  AgentState s;
  s.agent_id = agent_id;
  s.winning_bids.assign(world.n_tasks(), 0.0);
  s.winners.assign(world.n_tasks(), kNoWinner);
  s.path.owner = agent_id;
  s.timestamps.assign(world.n_agents(), 0.0);
  return s;
}

void validate_agent_state(const AgentState& s, const WorldInstance& world) {
  const int n_t = world.n_tasks();
  auto fail = [&](const std::string& what) {
    throw std::logic_error("agent " + std::to_string(s.agent_id) +
                           " state invariant broken: " + what);
  };
  if (s.agent_id < 0 || s.agent_id >= world.n_agents()) fail("agent id");
  if (static_cast<int>(s.winning_bids.size()) != n_t) fail("y length");
  if (static_cast<int>(s.winners.size()) != n_t) fail("z length");
  if (static_cast<int>(s.timestamps.size()) != world.n_agents())
    fail("timestamp length");
  if (s.path.owner != s.agent_id) fail("path owner");
  for (int j = 0; j < n_t; ++j) {
    if (!(s.winning_bids[j] >= 0.0) || !std::isfinite(s.winning_bids[j]))
      fail("y[" + std::to_string(j) + "] not a finite nonnegative bid");
    if ((s.winning_bids[j] > 0.0) != (s.winners[j] != kNoWinner))
      fail("y/z disagree on task " + std::to_string(j));
    if (s.winners[j] != kNoWinner &&
        (s.winners[j] < 0 || s.winners[j] >= world.n_agents()))
      fail("z[" + std::to_string(j) + "] out of range");
  }
  if (static_cast<int>(s.bundle.size()) > world.capacity) fail("bundle over capacity");
  std::unordered_set<int> in_bundle;
  for (int t : s.bundle) {
    if (t < 0 || t >= n_t) fail("bundle task out of range");
    if (!in_bundle.insert(t).second) fail("duplicate bundle task");
    if (s.winners[t] != s.agent_id)
      fail("bundle task " + std::to_string(t) + " not self-owned");
  }
  if (s.path.tasks.size() != s.bundle.size()) fail("path/bundle size");
  std::unordered_set<int> in_path;
  for (int t : s.path.tasks) {
    if (!in_bundle.count(t)) fail("path task not in bundle");
    if (!in_path.insert(t).second) fail("duplicate path task");
  }
}

Message Message::from(const AgentState& state, double now) {
  Message m;
  m.sender = state.agent_id;
  m.winning_bids = state.winning_bids;
  m.winners = state.winners;
  m.timestamps = state.timestamps;
  m.timestamps[state.agent_id] = now;
  return m;
}

Topology Topology::complete(int n_agents) {
  Topology t;
  t.neighbors.resize(n_agents);
  for (int i = 0; i < n_agents; ++i)
    for (int k = 0; k < n_agents; ++k)
      if (k != i) t.neighbors[i].push_back(k);
  return t;
}

std::vector<double> mask_bundle_bids(std::vector<double> bids,
                                     const std::vector<int>& bundle) {
  for (int t : bundle) {
    if (t < 0 || t >= static_cast<int>(bids.size()))
      throw std::invalid_argument("mask_bundle_bids: bundle task out of range");
    bids[t] = -std::numeric_limits<double>::infinity();
  }
  return bids;
}

void build_bundle(AgentState& s, const WorldInstance& world, Bidder& bidder,
                  int iteration) {
  const int n_t = world.n_tasks();
  const BidVector c = bidder.bid(s, world, iteration);
  if (static_cast<int>(c.size()) != n_t)
    throw std::logic_error("bidder returned wrong bid count");

  const std::vector<double> masked = mask_bundle_bids(c, s.bundle);
  std::vector<char> viable(n_t);
  for (int j = 0; j < n_t; ++j)
    viable[j] = masked[j] > s.winning_bids[j] ? 1 : 0;

  const Point2& pos = world.agents[s.agent_id];
  while (static_cast<int>(s.bundle.size()) < world.capacity) {
    int pick = -1;
    for (int j = 0; j < n_t; ++j)
      if (viable[j] && (pick < 0 || masked[j] > masked[pick])) pick = j;
    if (pick < 0) break;
    const Insertion ins = cheapest_insertion(pos, s.path, pick, world);
    s.path.tasks.insert(s.path.tasks.begin() + ins.position, pick);
    s.bundle.push_back(pick);
    s.winning_bids[pick] = masked[pick];
    s.winners[pick] = s.agent_id;
    viable[pick] = 0;
  }
}

void release_from(AgentState& s, int bundle_index) {
  if (bundle_index < 0 || bundle_index >= static_cast<int>(s.bundle.size()))
    throw std::invalid_argument("release_from: index out of range");
  for (int q = static_cast<int>(s.bundle.size()) - 1; q >= bundle_index; --q) {
    const int task = s.bundle[q];
    auto it = std::find(s.path.tasks.begin(), s.path.tasks.end(), task);
    if (it != s.path.tasks.end()) s.path.tasks.erase(it);
    if (s.winners[task] == s.agent_id) {
      s.winners[task] = kNoWinner;
      s.winning_bids[task] = 0.0;
    }
  }
  s.bundle.resize(bundle_index);
}

namespace {

enum class Action { leave, update, reset };

// equal bids resolve in favor of the lower agent index
bool bid_beats(double bid_a, int agent_a, double bid_b, int agent_b) {
  return bid_a > bid_b || (bid_a == bid_b && agent_a < agent_b);
}

// Standard CBBA decision table over the sender's and receiver's believed
// winners. `m`/`n` name third parties; freshness of relayed information is
// judged by the carried timestamps.
Action decide(int receiver, int sender, int z_r, double y_r, int z_s, double y_s,
              const std::vector<double>& s_r, const std::vector<double>& s_s) {
  const int i = receiver, k = sender;
  auto newer = [&](int about) { return s_s[about] > s_r[about]; };

  if (z_s == k) {  // sender claims itself
    if (z_r == i) return bid_beats(y_s, k, y_r, i) ? Action::update : Action::leave;
    if (z_r == k) return Action::update;
    if (z_r == kNoWinner) return Action::update;
    const int m = z_r;
    return (newer(m) || bid_beats(y_s, k, y_r, m)) ? Action::update : Action::leave;
  }
  if (z_s == i) {  // sender believes the receiver wins
    if (z_r == i) return Action::leave;
    if (z_r == k) return Action::reset;
    if (z_r == kNoWinner) return Action::leave;
    const int m = z_r;
    return newer(m) ? Action::reset : Action::leave;
  }
  if (z_s == kNoWinner) {
    if (z_r == i) return Action::leave;
    if (z_r == k) return Action::update;
    if (z_r == kNoWinner) return Action::leave;
    const int m = z_r;
    return newer(m) ? Action::update : Action::leave;
  }
  // sender believes a third party m wins
  const int m = z_s;
  if (z_r == i)
    return (newer(m) && bid_beats(y_s, m, y_r, i)) ? Action::update : Action::leave;
  if (z_r == k) return newer(m) ? Action::update : Action::reset;
  if (z_r == m) return newer(m) ? Action::update : Action::leave;
  if (z_r == kNoWinner) return newer(m) ? Action::update : Action::leave;
  const int n = z_r;  // a different third party
  if (newer(m) && newer(n)) return Action::update;
  if (newer(m) && bid_beats(y_s, m, y_r, n)) return Action::update;
  if (newer(n) && s_r[m] > s_s[m]) return Action::reset;
  return Action::leave;
}

}  // namespace

void resolve_conflicts(AgentState& r, const Message& msg, double now) {
  const int n_t = static_cast<int>(r.winning_bids.size());
  if (static_cast<int>(msg.winning_bids.size()) != n_t ||
      static_cast<int>(msg.winners.size()) != n_t ||
      msg.timestamps.size() != r.timestamps.size())
    throw std::invalid_argument("resolve_conflicts: dimension mismatch");

  for (int j = 0; j < n_t; ++j) {
    const Action a = decide(r.agent_id, msg.sender, r.winners[j],
                            r.winning_bids[j], msg.winners[j],
                            msg.winning_bids[j], r.timestamps, msg.timestamps);
    switch (a) {
      case Action::leave:
        break;
      case Action::update:
        r.winners[j] = msg.winners[j];
        r.winning_bids[j] = msg.winning_bids[j];
        break;
      case Action::reset:
        r.winners[j] = kNoWinner;
        r.winning_bids[j] = 0.0;
        break;
    }
  }

  // merge information freshness
  for (std::size_t m = 0; m < r.timestamps.size(); ++m) {
    if (static_cast<int>(m) == r.agent_id) continue;
    r.timestamps[m] = std::max(r.timestamps[m], msg.timestamps[m]);
  }
  r.timestamps[msg.sender] = std::max(r.timestamps[msg.sender], now);

  // releasing from the earliest lost slot also drops everything won after it
  for (int q = 0; q < static_cast<int>(r.bundle.size()); ++q) {
    if (r.winners[r.bundle[q]] != r.agent_id) {
      release_from(r, q);
      break;
    }
  }
}

double team_distance(const std::vector<AgentState>& states,
                     const WorldInstance& world) {
  double total = 0.0;
  for (const auto& s : states)
    total += path_length(world.agents[s.agent_id], s.path, world);
  return total;
}

int covered_tasks(const std::vector<AgentState>& states,
                  const WorldInstance& world) {
  std::vector<char> covered(world.n_tasks(), 0);
  for (const auto& s : states)
    for (int t : s.bundle) covered[t] = 1;
  int n = 0;
  for (char c : covered) n += c;
  return n;
}

void validate_convergence(const std::vector<AgentState>& states,
                          const WorldInstance& world) {
  if (states.empty()) return;
  const auto& first = states.front();
  for (const auto& s : states) {
    if (s.winning_bids != first.winning_bids || s.winners != first.winners)
      throw std::logic_error("converged agents disagree on (y, z)");
  }
  std::vector<int> claimed(world.n_tasks(), kNoWinner);
  for (const auto& s : states) {
    for (int t : s.bundle) {
      if (claimed[t] != kNoWinner)
        throw std::logic_error("task " + std::to_string(t) +
                               " claimed by two bundles");
      claimed[t] = s.agent_id;
    }
  }
  for (int j = 0; j < world.n_tasks(); ++j) {
    if (first.winners[j] != claimed[j])
      throw std::logic_error("winner table does not match bundles for task " +
                             std::to_string(j));
  }
}

RunResult run_allocation(const WorldInstance& world, Bidder& bidder,
                         const RunConfig& config) {
  if (config.max_iterations < 1)
    throw std::invalid_argument("run_allocation: max_iterations < 1");
  if (config.convergence_window < 1)
    throw std::invalid_argument("run_allocation: convergence_window < 1");
  const int n_u = world.n_agents();
  const Topology topo =
      config.topology ? *config.topology : Topology::complete(n_u);
  if (static_cast<int>(topo.neighbors.size()) != n_u)
    throw std::invalid_argument("run_allocation: topology size mismatch");

  bidder.begin_world(world);
  std::vector<AgentState> states;
  states.reserve(n_u);
  for (int i = 0; i < n_u; ++i) states.push_back(AgentState::fresh(i, world));

  RunResult result;
  int unchanged = 0;
  int last_change = 0;
  bool converged = false;

  for (int round = 1; round <= config.max_iterations; ++round) {
    std::vector<std::vector<double>> y_before(n_u);
    std::vector<std::vector<int>> z_before(n_u);
    for (int i = 0; i < n_u; ++i) {
      y_before[i] = states[i].winning_bids;
      z_before[i] = states[i].winners;
    }

    // Phase 1: every agent extends its bundle
    for (int i = 0; i < n_u; ++i) {
      build_bundle(states[i], world, bidder, round);
      if (config.validate) validate_agent_state(states[i], world);
    }

    // Phase 2: simultaneous exchange, then deterministic per-receiver updates
    std::vector<Message> msgs;
    msgs.reserve(n_u);
    for (int k = 0; k < n_u; ++k)
      msgs.push_back(Message::from(states[k], round));
    for (int i = 0; i < n_u; ++i) {
      states[i].timestamps[i] = round;
      for (int k : topo.neighbors[i]) {
        if (k == i) continue;
        resolve_conflicts(states[i], msgs[k], round);
        if (config.validate) validate_agent_state(states[i], world);
      }
    }

    bool changed = false;
    for (int i = 0; i < n_u && !changed; ++i)
      changed = states[i].winning_bids != y_before[i] ||
                states[i].winners != z_before[i];
    if (changed) {
      unchanged = 0;
      last_change = round;
    } else {
      ++unchanged;
    }

    if (config.record_trajectory) result.trajectory.push_back({round, states});
    if (unchanged >= config.convergence_window) {
      converged = true;
      break;
    }
  }

  result.timed_out = !converged;
  result.iterations_used = converged ? last_change : config.max_iterations;
  result.assignment.reserve(n_u);
  for (const auto& s : states) result.assignment.push_back(s.path);
  if (converged && config.validate) validate_convergence(states, world);
  return result;
}

}  // namespace mrta
