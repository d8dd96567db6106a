#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mrta/consensus.hpp"
#include "mrta/nets.hpp"
#include "mrta/rng.hpp"
#include "mrta/world.hpp"

namespace mrta {

inline constexpr int kFeatureCount = 8;

// Ordered names of the per-task features produced by build_observation.
const std::vector<std::string>& feature_spec();

// Per-task feature matrix, computed from the agent's own state and the public
// task positions only.
struct Observation {
  int n_tasks = 0;
  std::vector<double> features;  // row-major, n_tasks x kFeatureCount

  double at(int task, int f) const {
    return features[static_cast<std::size_t>(task) * kFeatureCount + f];
  }
  double& at(int task, int f) {
    return features[static_cast<std::size_t>(task) * kFeatureCount + f];
  }
};

using BidVector = std::vector<double>;

enum class Architecture { classic, nam, lstm, critic };

std::string to_string(Architecture arch);
Architecture architecture_from_string(const std::string& s);

struct PolicyParameters {
  Architecture arch = Architecture::classic;
  std::map<std::string, double> hyper;
  ParamMap params;
  std::vector<std::string> features;

  int hyper_int(const std::string& key) const;
  double log_std() const;
};

// Per-task LSTM carry, reset at the start of each world.
struct RecurrentContext {
  int n_tasks = 0;
  int hidden = 0;
  std::vector<double> h;  // n_tasks x hidden
  std::vector<double> c;  // n_tasks x hidden

  bool empty() const { return h.empty(); }
};

Observation build_observation(const AgentState& state, const WorldInstance& world);

BidVector classic_bid(const AgentState& state, const WorldInstance& world);

// --- neural additive model: one small univariate net per feature -----------

PolicyParameters nam_init(std::uint64_t seed, int units = 16);

BidVector nam_forward(const PolicyParameters& params, const Observation& obs);

// pre-transform additive terms, row-major n_tasks x kFeatureCount
std::vector<double> nam_contributions(const PolicyParameters& params,
                                      const Observation& obs);

// forward-pass intermediates needed by the backward pass
struct NamTrace {
  int n_tasks = 0;
  int units = 0;
  std::vector<double> x;    // n_tasks x F
  std::vector<double> a1;   // n_tasks x F x units
  std::vector<double> a2;   // n_tasks x F x units
  std::vector<double> pre;  // n_tasks
};

BidVector nam_forward_cached(const PolicyParameters& params,
                             const Observation& obs, NamTrace& trace);
void nam_backward(const PolicyParameters& params, const NamTrace& trace,
                  const std::vector<double>& dbids, ParamMap& grad);

// --- shared-cell LSTM with an MLP head --------------------------------------

PolicyParameters lstm_init(std::uint64_t seed, int hidden = 64, int head = 32);

RecurrentContext make_context(const PolicyParameters& params, int n_tasks);

std::pair<BidVector, RecurrentContext> lstm_forward(
    const PolicyParameters& params, const Observation& obs,
    const RecurrentContext& ctx);

struct LstmTrace {
  int n_tasks = 0;
  int hidden = 0;
  int head = 0;
  std::vector<double> x;       // n_tasks x F
  std::vector<double> h_in;    // n_tasks x H
  std::vector<double> c_in;    // n_tasks x H
  std::vector<double> gates;   // n_tasks x 4H, post-activation [i f g o]
  std::vector<double> tanh_c;  // n_tasks x H
  std::vector<double> h_out;   // n_tasks x H
  std::vector<double> u1;      // n_tasks x head, post-tanh
  std::vector<double> u2;      // n_tasks, pre-softplus
};

std::pair<BidVector, RecurrentContext> lstm_forward_cached(
    const PolicyParameters& params, const Observation& obs,
    const RecurrentContext& ctx, LstmTrace& trace);
void lstm_backward(const PolicyParameters& params, const LstmTrace& trace,
                   const std::vector<double>& dbids, ParamMap& grad);

// --- policy entry point ------------------------------------------------------

struct PolicySample {
  BidVector bids;
  double log_prob = 0.0;  // meaningful in stochastic mode only
};

// Deterministic mode returns the mean bid. Stochastic mode perturbs each bid
// with N(0, exp(log_std)) and reports the joint log-density; ctx (LSTM only)
// is advanced in place.
PolicySample policy_bid(const PolicyParameters& params, const AgentState& state,
                        const WorldInstance& world, RecurrentContext* ctx,
                        bool stochastic, Rng* rng);

double gaussian_log_prob(const BidVector& sample, const BidVector& mean,
                         double log_std);

// --- checkpoint io -----------------------------------------------------------

// JSON manifest naming every parameter's shape and byte offset, raw
// little-endian float32 data in a sibling .bin. Load-then-save is bit-exact.
void save_checkpoint(const std::filesystem::path& manifest_path,
                     const PolicyParameters& params);
PolicyParameters load_checkpoint(const std::filesystem::path& manifest_path);

// --- bidding policies as seen by the consensus engine ------------------------

class Bidder {
 public:
  virtual ~Bidder() = default;
  virtual std::string name() const = 0;
  virtual void begin_world(const WorldInstance& world) {}
  virtual BidVector bid(const AgentState& state, const WorldInstance& world,
                        int iteration) = 0;
  virtual std::unique_ptr<Bidder> clone() const = 0;
};

class ClassicBidder final : public Bidder {
 public:
  std::string name() const override { return "classic"; }
  BidVector bid(const AgentState& state, const WorldInstance& world,
                int iteration) override;
  std::unique_ptr<Bidder> clone() const override;
};

// One rollout record per (agent, iteration) policy call.
struct RolloutStep {
  int agent = 0;
  int iteration = 0;
  Observation obs;
  RecurrentContext ctx;  // state before the call; empty for NAM
  BidVector action;
  double log_prob = 0.0;
};

class NeuralBidder final : public Bidder {
 public:
  explicit NeuralBidder(PolicyParameters params);

  std::string name() const override;
  void begin_world(const WorldInstance& world) override;
  BidVector bid(const AgentState& state, const WorldInstance& world,
                int iteration) override;
  std::unique_ptr<Bidder> clone() const override;

  // enables Gaussian exploration and step recording
  void set_stochastic(std::uint64_t seed);
  const std::vector<RolloutStep>& steps() const { return steps_; }
  const PolicyParameters& parameters() const { return *params_; }

 private:
  std::shared_ptr<const PolicyParameters> params_;
  std::vector<RecurrentContext> contexts_;
  bool stochastic_ = false;
  std::optional<Rng> rng_;
  std::vector<RolloutStep> steps_;
};

}  // namespace mrta
