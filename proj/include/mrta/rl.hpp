#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mrta/bidding.hpp"
#include "mrta/consensus.hpp"
#include "mrta/oracle.hpp"

namespace mrta {

struct RewardWeights {
  double w_d = 0.5;
  double w_c = 0.2;
  double w_a = 0.3;
};

struct RewardComponents {
  double r_d = 0.0, r_c = 0.0, r_a = 0.0;

  double total(const RewardWeights& w) const {
    return w.w_d * r_d + w.w_c * r_c + w.w_a * r_a;
  }
};

// Team-shared shaped reward between two consecutive consensus snapshots:
// distance improvement over D*, coverage delta, and agreement-with-oracle
// delta, each clipped to [-1, 1].
RewardComponents compute_reward_components(const std::vector<AgentState>& prev,
                                           const std::vector<AgentState>& curr,
                                           const OptimalAssignment& oracle,
                                           const WorldInstance& world);

double compute_reward(const std::vector<AgentState>& prev,
                      const std::vector<AgentState>& curr,
                      const OptimalAssignment& oracle,
                      const WorldInstance& world, const RewardWeights& weights);

// --- centralized critic -------------------------------------------------------

struct CriticLayout {
  int max_agents = 8;
  int max_tasks = 32;

  int dim() const;
};

// Fixed-size global encoding: sizes, positions, (y, z) tables, coverage
// fraction, and team distance over D*. Training-only input.
std::vector<double> build_critic_input(const WorldInstance& world,
                                       const std::vector<AgentState>& states,
                                       const OptimalAssignment& oracle,
                                       const CriticLayout& layout = {});

PolicyParameters critic_init(std::uint64_t seed, const CriticLayout& layout = {},
                             int h1 = 128, int h2 = 64);
double critic_forward(const PolicyParameters& params,
                      const std::vector<double>& input);
struct CriticTrace;
double critic_forward_cached(const PolicyParameters& params,
                             const std::vector<double>& input,
                             CriticTrace& trace);
void critic_backward(const PolicyParameters& params, const CriticTrace& trace,
                     double dvalue, ParamMap& grad);

// --- rollouts -------------------------------------------------------------------

struct Transition {
  int agent = 0;
  int iteration = 0;
  Observation obs;
  RecurrentContext ctx;  // pre-step carry; empty for NAM
  BidVector action;
  double log_prob = 0.0;
  RewardComponents reward_parts;
  double reward = 0.0;
  double value = 0.0;
  bool done = false;
  std::vector<double> critic_input;
  double advantage = 0.0;
  double ret = 0.0;
};

struct PPOConfig {
  double clip = 0.2;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double learning_rate = 3e-4;
  int epochs_per_batch = 4;
  int minibatch = 256;
  int worlds_per_epoch = 32;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  bool terminal_bonus = true;
};

// memoized classic-bidder final distances keyed by world id
using BaselineCache = std::map<std::string, double>;

std::vector<Transition> collect_rollouts(
    const std::vector<WorldInstance>& worlds, const PolicyParameters& actor,
    const PolicyParameters& critic, const PPOConfig& cfg,
    const RewardWeights& weights, const RunConfig& run_cfg,
    const OracleCache& oracle, std::uint64_t seed,
    BaselineCache* baselines = nullptr, const CriticLayout& layout = {});

// GAE over one agent's episode stream, in place (expects time order).
void compute_gae(std::vector<Transition*>& stream, double gamma, double lambda);
void normalize_advantages(std::vector<Transition>& batch);

struct PPODiagnostics {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double mean_ratio = 0.0;
  bool aborted = false;
  std::string abort_reason;
};

PPODiagnostics ppo_update(PolicyParameters& actor, PolicyParameters& critic,
                          AdamState& actor_opt, AdamState& critic_opt,
                          const std::vector<Transition>& batch,
                          const PPOConfig& cfg, std::uint64_t seed);

// --- training loop ----------------------------------------------------------------

struct TrainConfig {
  PPOConfig ppo;
  RewardWeights weights;
  RunConfig run;
  CriticLayout critic_layout;
  int total_epochs = 200;
  int checkpoint_every = 20;
  std::filesystem::path out_dir;  // empty: keep everything in memory
};

struct EpochStats {
  int epoch = 0;
  double probe_eta_mean = 0.0;
  int probe_timeouts = 0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double mean_ratio = 0.0;
};

struct TrainState {
  PolicyParameters actor;
  PolicyParameters critic;
  AdamState actor_opt;
  AdamState critic_opt;
  int epochs_done = 0;
  std::vector<EpochStats> curve;
  PolicyParameters best_actor;
  double best_probe_eta = -1.0;
};

// Evaluates the deterministic policy on the probe set; mean eta over
// clean runs plus the timeout count.
std::pair<double, int> probe_eval(const PolicyParameters& actor,
                                  const std::vector<WorldInstance>& probe,
                                  const OracleCache& probe_oracle,
                                  const RunConfig& run_cfg);

TrainState train(const std::vector<WorldInstance>& dataset,
                 Architecture arch, const TrainConfig& cfg,
                 const OracleCache& oracle,
                 const std::vector<WorldInstance>& probe,
                 const OracleCache& probe_oracle, std::uint64_t seed,
                 std::optional<TrainState> resume = std::nullopt);

void save_train_state(const std::filesystem::path& dir, const TrainState& state,
                      Architecture arch);
std::optional<TrainState> load_train_state(const std::filesystem::path& dir,
                                           Architecture arch);

void write_curve_csv(const std::filesystem::path& path,
                     const std::vector<EpochStats>& curve);

}  // namespace mrta
