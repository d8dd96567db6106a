#include "mrta/rl.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "mrta/io.hpp"
#include "mrta/rng.hpp"

namespace mrta {

namespace {

constexpr double kLogStdMin = -4.0;
constexpr double kLogStdMax = 1.0;

int count_agreement(const std::vector<AgentState>& states,
                    const std::vector<int>& oracle_owner) {
  std::vector<char> hit(oracle_owner.size(), 0);
  for (const auto& s : states)
    for (int t : s.bundle)
      if (oracle_owner[t] == s.agent_id) hit[t] = 1;
  int n = 0;
  for (char c : hit) n += c;
  return n;
}

double clip_unit(double v) { return std::clamp(v, -1.0, 1.0); }

}  // namespace

RewardComponents compute_reward_components(const std::vector<AgentState>& prev,
                                           const std::vector<AgentState>& curr,
                                           const OptimalAssignment& oracle,
                                           const WorldInstance& world) {
  const double d_star = oracle.total_distance;
  const double d_prev = team_distance(prev, world);
  const double d_curr = team_distance(curr, world);

  RewardComponents rc;
  if (d_star <= 0.0) {
    if (d_prev > 0.0 || d_curr > 0.0)
      throw std::invalid_argument("compute_reward: D* = 0 with nonzero routes");
    rc.r_d = 0.0;
  } else {
    rc.r_d = clip_unit((d_prev - d_curr) / d_star);
  }

  const double n_t = static_cast<double>(world.n_tasks());
  rc.r_c = (covered_tasks(curr, world) - covered_tasks(prev, world)) / n_t;

  const std::vector<int> owner = oracle.owners(world.n_tasks());
  rc.r_a = (count_agreement(curr, owner) - count_agreement(prev, owner)) / n_t;
  return rc;
}

double compute_reward(const std::vector<AgentState>& prev,
                      const std::vector<AgentState>& curr,
                      const OptimalAssignment& oracle, const WorldInstance& world,
                      const RewardWeights& weights) {
  return compute_reward_components(prev, curr, oracle, world).total(weights);
}

// --- critic ---------------------------------------------------------------------

int CriticLayout::dim() const {
  return 2 + 2 * max_agents + 2 * max_tasks + 2 * max_agents * max_tasks + 2;
}

std::vector<double> build_critic_input(const WorldInstance& world,
                                       const std::vector<AgentState>& states,
                                       const OptimalAssignment& oracle,
                                       const CriticLayout& layout) {
  const int n_u = world.n_agents();
  const int n_t = world.n_tasks();
  if (n_u > layout.max_agents || n_t > layout.max_tasks)
    throw std::invalid_argument("build_critic_input: world exceeds layout maxima");
  if (static_cast<int>(states.size()) != n_u)
    throw std::invalid_argument("build_critic_input: state count mismatch");

  std::vector<double> in(layout.dim(), 0.0);
  int at = 0;
  in[at++] = static_cast<double>(n_u) / layout.max_agents;
  in[at++] = static_cast<double>(n_t) / layout.max_tasks;
  const double side = world.workspace_side;
  for (int i = 0; i < layout.max_agents; ++i) {
    if (i < n_u) {
      in[at] = world.agents[i].x / side;
      in[at + 1] = world.agents[i].y / side;
    }
    at += 2;
  }
  for (int j = 0; j < layout.max_tasks; ++j) {
    if (j < n_t) {
      in[at] = world.tasks[j].x / side;
      in[at + 1] = world.tasks[j].y / side;
    }
    at += 2;
  }
  for (int i = 0; i < layout.max_agents; ++i)
    for (int j = 0; j < layout.max_tasks; ++j) {
      if (i < n_u && j < n_t)
        in[at] = std::clamp(states[i].winning_bids[j], 0.0, 1.0);
      ++at;
    }
  for (int i = 0; i < layout.max_agents; ++i)
    for (int j = 0; j < layout.max_tasks; ++j) {
      if (i < n_u && j < n_t)
        in[at] = static_cast<double>(states[i].winners[j] + 1) / layout.max_agents;
      ++at;
    }
  in[at++] = static_cast<double>(covered_tasks(states, world)) / n_t;
  const double d_star = oracle.total_distance;
  in[at++] = std::clamp(
      team_distance(states, world) / (d_star > 0.0 ? d_star : 1.0), 0.0, 4.0);
  return in;
}

struct CriticTrace {
  std::vector<double> input;
  std::vector<double> a1;
  std::vector<double> a2;
  double v = 0.0;
};

PolicyParameters critic_init(std::uint64_t seed, const CriticLayout& layout,
                             int h1, int h2) {
  Rng rng(derive_seed(seed, "critic-init"));
  PolicyParameters p;
  p.arch = Architecture::critic;
  p.hyper["input"] = layout.dim();
  p.hyper["h1"] = h1;
  p.hyper["h2"] = h2;
  p.params["w1"] = init_linear(rng, h1, layout.dim());
  p.params["b1"] = Tensor({h1});
  p.params["w2"] = init_linear(rng, h2, h1);
  p.params["b2"] = Tensor({h2});
  p.params["w3"] = init_linear(rng, 1, h2);
  p.params["b3"] = Tensor({1});
  return p;
}

static double critic_run(const PolicyParameters& p,
                         const std::vector<double>& input, CriticTrace* trace) {
  if (p.arch != Architecture::critic)
    throw std::invalid_argument("expected critic parameters");
  const int in_dim = p.hyper_int("input");
  const int h1 = p.hyper_int("h1");
  const int h2 = p.hyper_int("h2");
  if (static_cast<int>(input.size()) != in_dim)
    throw std::invalid_argument("critic input dimension mismatch");

  std::vector<double> a1(h1), a2(h2);
  linear_forward(p.params.at("w1"), p.params.at("b1"), input.data(), a1.data());
  tanh_inplace(a1.data(), h1);
  linear_forward(p.params.at("w2"), p.params.at("b2"), a1.data(), a2.data());
  tanh_inplace(a2.data(), h2);
  double v = p.params.at("b3").data[0];
  const Tensor& w3 = p.params.at("w3");
  for (int i = 0; i < h2; ++i) v += w3.data[i] * a2[i];
  if (trace) {
    trace->input = input;
    trace->a1 = std::move(a1);
    trace->a2 = std::move(a2);
    trace->v = v;
  }
  return v;
}

double critic_forward(const PolicyParameters& params,
                      const std::vector<double>& input) {
  return critic_run(params, input, nullptr);
}

double critic_forward_cached(const PolicyParameters& params,
                             const std::vector<double>& input,
                             CriticTrace& trace) {
  return critic_run(params, input, &trace);
}

void critic_backward(const PolicyParameters& p, const CriticTrace& trace,
                     double dvalue, ParamMap& grad) {
  const int h1 = p.hyper_int("h1");
  const int h2 = p.hyper_int("h2");
  const Tensor& w2 = p.params.at("w2");
  const Tensor& w3 = p.params.at("w3");

  grad.at("b3").data[0] += dvalue;
  std::vector<double> da2(h2), da1(h1);
  auto& dw3 = grad.at("w3");
  for (int i = 0; i < h2; ++i) {
    dw3.data[i] += dvalue * trace.a2[i];
    da2[i] = dvalue * w3.data[i] * (1.0 - trace.a2[i] * trace.a2[i]);
  }
  linear_backward(w2, trace.a1.data(), da2.data(), grad.at("w2"),
                  grad.at("b2"), da1.data());
  for (int i = 0; i < h1; ++i) da1[i] *= 1.0 - trace.a1[i] * trace.a1[i];
  linear_backward(p.params.at("w1"), trace.input.data(), da1.data(),
                  grad.at("w1"), grad.at("b1"), nullptr);
}

// --- rollouts ---------------------------------------------------------------------

std::vector<Transition> collect_rollouts(
    const std::vector<WorldInstance>& worlds, const PolicyParameters& actor,
    const PolicyParameters& critic, const PPOConfig& cfg,
    const RewardWeights& weights, const RunConfig& run_cfg,
    const OracleCache& oracle, std::uint64_t seed, BaselineCache* baselines,
    const CriticLayout& layout) {
  std::vector<Transition> batch;

  RunConfig rollout_cfg = run_cfg;
  rollout_cfg.record_trajectory = true;

  for (std::size_t widx = 0; widx < worlds.size(); ++widx) {
    const WorldInstance& world = worlds[widx];
    const auto oit = oracle.find(world.id.str());
    if (oit == oracle.end())
      throw std::runtime_error("collect_rollouts: no oracle entry for world " +
                               world.id.str());
    const OptimalAssignment& opt = oit->second;

    NeuralBidder bidder(actor);
    bidder.set_stochastic(derive_seed(seed, "rollout-world", widx));
    const RunResult run = run_allocation(world, bidder, rollout_cfg);

    const int n_u = world.n_agents();
    const int rounds = static_cast<int>(run.trajectory.size());
    if (static_cast<int>(bidder.steps().size()) != rounds * n_u)
      throw std::logic_error("rollout step count does not match trajectory");

    std::vector<AgentState> initial;
    initial.reserve(n_u);
    for (int i = 0; i < n_u; ++i) initial.push_back(AgentState::fresh(i, world));

    double classic_distance = 0.0;
    if (cfg.terminal_bonus && !run.timed_out) {
      const std::string key = world.id.str();
      if (baselines) {
        const auto bit = baselines->find(key);
        if (bit != baselines->end()) {
          classic_distance = bit->second;
        } else {
          ClassicBidder classic;
          RunConfig quiet = run_cfg;
          quiet.record_trajectory = false;
          const RunResult base = run_allocation(world, classic, quiet);
          classic_distance = 0.0;
          for (const auto& p : base.assignment)
            classic_distance += path_length(world.agents[p.owner], p, world);
          (*baselines)[key] = classic_distance;
        }
      } else {
        ClassicBidder classic;
        RunConfig quiet = run_cfg;
        quiet.record_trajectory = false;
        const RunResult base = run_allocation(world, classic, quiet);
        for (const auto& p : base.assignment)
          classic_distance += path_length(world.agents[p.owner], p, world);
      }
    }

    const std::size_t first = batch.size();
    for (int r = 0; r < rounds; ++r) {
      const std::vector<AgentState>& prev =
          r == 0 ? initial : run.trajectory[r - 1].states;
      const std::vector<AgentState>& curr = run.trajectory[r].states;

      const RewardComponents parts =
          compute_reward_components(prev, curr, opt, world);
      double reward = parts.total(weights);
      const bool last = r == rounds - 1;
      if (last && !run.timed_out && cfg.terminal_bonus &&
          opt.total_distance > 0.0) {
        const double d_final = team_distance(curr, world);
        reward += weights.w_d *
                  clip_unit((classic_distance - d_final) / opt.total_distance);
      }

      const std::vector<double> critic_in =
          build_critic_input(world, prev, opt, layout);
      const double value = critic_forward(critic, critic_in);

      for (int i = 0; i < n_u; ++i) {
        const RolloutStep& step = bidder.steps()[static_cast<std::size_t>(r) * n_u + i];
        Transition t;
        t.agent = step.agent;
        t.iteration = step.iteration;
        t.obs = step.obs;
        t.ctx = step.ctx;
        t.action = step.action;
        t.log_prob = step.log_prob;
        t.reward_parts = parts;
        t.reward = reward;
        t.value = value;
        t.done = last;
        t.critic_input = critic_in;
        batch.push_back(std::move(t));
      }
    }

    // GAE per agent stream within this world's episode
    for (int i = 0; i < n_u; ++i) {
      std::vector<Transition*> stream;
      stream.reserve(rounds);
      for (int r = 0; r < rounds; ++r)
        stream.push_back(&batch[first + static_cast<std::size_t>(r) * n_u + i]);
      compute_gae(stream, cfg.gamma, cfg.gae_lambda);
    }
  }

  normalize_advantages(batch);
  return batch;
}

void compute_gae(std::vector<Transition*>& stream, double gamma, double lambda) {
  double acc = 0.0;
  for (int t = static_cast<int>(stream.size()) - 1; t >= 0; --t) {
    Transition& tr = *stream[t];
    const double nonterminal = tr.done ? 0.0 : 1.0;
    const double next_value =
        t + 1 < static_cast<int>(stream.size()) ? stream[t + 1]->value : 0.0;
    const double delta =
        tr.reward + gamma * next_value * nonterminal - tr.value;
    acc = delta + gamma * lambda * nonterminal * acc;
    tr.advantage = acc;
    tr.ret = acc + tr.value;
  }
}

void normalize_advantages(std::vector<Transition>& batch) {
  if (batch.empty()) return;
  double mean = 0.0;
  for (const auto& t : batch) mean += t.advantage;
  mean /= static_cast<double>(batch.size());
  double var = 0.0;
  for (const auto& t : batch) {
    const double d = t.advantage - mean;
    var += d * d;
  }
  var /= static_cast<double>(batch.size());
  const double inv = 1.0 / std::max(std::sqrt(var), 1e-8);
  for (auto& t : batch) t.advantage = (t.advantage - mean) * inv;
}

// --- PPO ---------------------------------------------------------------------------

PPODiagnostics ppo_update(PolicyParameters& actor, PolicyParameters& critic,
                          AdamState& actor_opt, AdamState& critic_opt,
                          const std::vector<Transition>& batch,
                          const PPOConfig& cfg, std::uint64_t seed) {
  if (batch.empty()) throw std::invalid_argument("ppo_update: empty batch");
  if (actor.arch != Architecture::nam && actor.arch != Architecture::lstm)
    throw std::invalid_argument("ppo_update: actor must be nam or lstm");

  PPODiagnostics diag;
  double ratio_sum = 0.0, policy_sum = 0.0, value_sum = 0.0, entropy_sum = 0.0;
  long long clip_count = 0, seen = 0;

  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), 0);

  for (int pass = 0; pass < cfg.epochs_per_batch; ++pass) {
    Rng shuffle_rng(derive_seed(seed, "ppo-shuffle", pass));
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j =
          static_cast<std::size_t>(shuffle_rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }

    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.minibatch)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.minibatch));
      const double scale = 1.0 / static_cast<double>(end - start);

      ParamMap actor_grad = zeros_like(actor.params);
      ParamMap critic_grad = zeros_like(critic.params);
      const double log_std = actor.log_std();
      const double sigma = std::exp(log_std);
      double mb_loss = 0.0;

      for (std::size_t s = start; s < end; ++s) {
        const Transition& t = batch[order[s]];
        const int n_t = t.obs.n_tasks;

        BidVector mean;
        NamTrace nam_trace;
        LstmTrace lstm_trace;
        if (actor.arch == Architecture::nam) {
          mean = nam_forward_cached(actor, t.obs, nam_trace);
        } else {
          auto [bids, next] = lstm_forward_cached(actor, t.obs, t.ctx, lstm_trace);
          mean = std::move(bids);
        }

        const double logp_new = gaussian_log_prob(t.action, mean, log_std);
        const double ratio = std::exp(logp_new - t.log_prob);
        const double surr1 = ratio * t.advantage;
        const double clamped = std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip);
        const double surr2 = clamped * t.advantage;
        const double policy_loss = -std::min(surr1, surr2);
        const double entropy =
            n_t * (log_std + 0.5 * std::log(2.0 * M_PI * std::exp(1.0)));

        ratio_sum += ratio;
        policy_sum += policy_loss;
        entropy_sum += entropy;
        if (std::abs(ratio - 1.0) > cfg.clip) ++clip_count;
        ++seen;

        mb_loss += policy_loss - cfg.entropy_coef * entropy;

        // gradient flows through the unclipped branch only
        if (surr1 <= surr2) {
          const double dlogp = -t.advantage * ratio * scale;
          std::vector<double> dmean(n_t);
          double dlogstd = 0.0;
          for (int j = 0; j < n_t; ++j) {
            const double z = (t.action[j] - mean[j]) / sigma;
            dmean[j] = dlogp * z / sigma;
            dlogstd += dlogp * (z * z - 1.0);
          }
          actor_grad.at("log_std").data[0] += dlogstd;
          if (actor.arch == Architecture::nam)
            nam_backward(actor, nam_trace, dmean, actor_grad);
          else
            lstm_backward(actor, lstm_trace, dmean, actor_grad);
        }
        actor_grad.at("log_std").data[0] -= cfg.entropy_coef * n_t * scale;

        CriticTrace ctrace;
        const double v = critic_forward_cached(critic, t.critic_input, ctrace);
        const double verr = v - t.ret;
        value_sum += verr * verr;
        mb_loss += cfg.value_coef * verr * verr;
        critic_backward(critic, ctrace, cfg.value_coef * 2.0 * verr * scale,
                        critic_grad);
      }

      if (!std::isfinite(mb_loss)) {
        diag.aborted = true;
        diag.abort_reason = "non-finite minibatch loss";
        diag.mean_ratio = seen ? ratio_sum / static_cast<double>(seen) : 0.0;
        diag.policy_loss = seen ? policy_sum / static_cast<double>(seen) : 0.0;
        diag.value_loss = seen ? value_sum / static_cast<double>(seen) : 0.0;
        diag.entropy = seen ? entropy_sum / static_cast<double>(seen) : 0.0;
        diag.clip_fraction =
            seen ? static_cast<double>(clip_count) / static_cast<double>(seen) : 0.0;
        return diag;
      }

      adam_step(actor.params, actor_grad, actor_opt, cfg.learning_rate);
      adam_step(critic.params, critic_grad, critic_opt, cfg.learning_rate);
      auto& ls = actor.params.at("log_std").data[0];
      ls = std::clamp(ls, kLogStdMin, kLogStdMax);
    }
  }

  diag.mean_ratio = ratio_sum / static_cast<double>(seen);
  diag.policy_loss = policy_sum / static_cast<double>(seen);
  diag.value_loss = value_sum / static_cast<double>(seen);
  diag.entropy = entropy_sum / static_cast<double>(seen);
  diag.clip_fraction =
      static_cast<double>(clip_count) / static_cast<double>(seen);
  return diag;
}

// --- training loop -------------------------------------------------------------------

std::pair<double, int> probe_eval(const PolicyParameters& actor,
                                  const std::vector<WorldInstance>& probe,
                                  const OracleCache& probe_oracle,
                                  const RunConfig& run_cfg) {
  double eta_sum = 0.0;
  int eta_count = 0;
  int timeouts = 0;
  RunConfig quiet = run_cfg;
  quiet.record_trajectory = false;

  for (const auto& world : probe) {
    const auto oit = probe_oracle.find(world.id.str());
    if (oit == probe_oracle.end())
      throw std::runtime_error("probe_eval: no oracle entry for world " +
                               world.id.str());
    NeuralBidder bidder(actor);
    const RunResult run = run_allocation(world, bidder, quiet);
    if (run.timed_out) {
      ++timeouts;
      continue;
    }
    double d_hat = 0.0;
    int covered = 0;
    for (const auto& p : run.assignment) {
      d_hat += path_length(world.agents[p.owner], p, world);
      covered += static_cast<int>(p.tasks.size());
    }
    if (covered < world.n_tasks() || d_hat <= 0.0) continue;
    eta_sum += 100.0 * oit->second.total_distance / d_hat;
    ++eta_count;
  }
  return {eta_count ? eta_sum / eta_count : 0.0, timeouts};
}

TrainState train(const std::vector<WorldInstance>& dataset, Architecture arch,
                 const TrainConfig& cfg, const OracleCache& oracle,
                 const std::vector<WorldInstance>& probe,
                 const OracleCache& probe_oracle, std::uint64_t seed,
                 std::optional<TrainState> resume) {
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  for (const auto& w : dataset)
    if (!oracle.count(w.id.str()))
      throw std::runtime_error("train: oracle cache missing world " + w.id.str());

  TrainState st;
  if (resume) {
    st = std::move(*resume);
  } else {
    if (arch == Architecture::nam)
      st.actor = nam_init(derive_seed(seed, "actor-init"));
    else if (arch == Architecture::lstm)
      st.actor = lstm_init(derive_seed(seed, "actor-init"));
    else
      throw std::invalid_argument("train: arch must be nam or lstm");
    st.critic = critic_init(derive_seed(seed, "critic-init"), cfg.critic_layout);
    st.best_actor = st.actor;
  }

  BaselineCache baselines;
  for (int epoch = st.epochs_done + 1; epoch <= cfg.total_epochs; ++epoch) {
    Rng sample_rng(derive_seed(seed, "sample", static_cast<std::uint64_t>(epoch)));
    std::vector<WorldInstance> worlds;
    worlds.reserve(cfg.ppo.worlds_per_epoch);
    for (int i = 0; i < cfg.ppo.worlds_per_epoch; ++i)
      worlds.push_back(dataset[static_cast<std::size_t>(sample_rng.uniform_int(
          0, static_cast<std::int64_t>(dataset.size()) - 1))]);

    const std::vector<Transition> batch = collect_rollouts(
        worlds, st.actor, st.critic, cfg.ppo, cfg.weights, cfg.run, oracle,
        derive_seed(seed, "rollout", static_cast<std::uint64_t>(epoch)),
        &baselines, cfg.critic_layout);

    EpochStats stats;
    stats.epoch = epoch;
    if (!batch.empty()) {
      const PPODiagnostics diag = ppo_update(
          st.actor, st.critic, st.actor_opt, st.critic_opt, batch, cfg.ppo,
          derive_seed(seed, "update", static_cast<std::uint64_t>(epoch)));
      if (diag.aborted)
        throw std::runtime_error("train: ppo update aborted: " + diag.abort_reason);
      stats.policy_loss = diag.policy_loss;
      stats.value_loss = diag.value_loss;
      stats.entropy = diag.entropy;
      stats.clip_fraction = diag.clip_fraction;
      stats.mean_ratio = diag.mean_ratio;
    }

    const auto [eta, timeouts] = probe_eval(st.actor, probe, probe_oracle, cfg.run);
    stats.probe_eta_mean = eta;
    stats.probe_timeouts = timeouts;
    st.curve.push_back(stats);
    st.epochs_done = epoch;

    if (eta > st.best_probe_eta) {
      st.best_probe_eta = eta;
      st.best_actor = st.actor;
    }

    if (!cfg.out_dir.empty() &&
        (epoch % cfg.checkpoint_every == 0 || epoch == cfg.total_epochs))
      save_train_state(cfg.out_dir, st, arch);
  }

  if (!cfg.out_dir.empty()) save_train_state(cfg.out_dir, st, arch);
  return st;
}

// --- persistence ------------------------------------------------------------------------

namespace {

PolicyParameters pack_adam(const AdamState& opt) {
  PolicyParameters p;
  p.arch = Architecture::critic;  // opaque blob, named tensors carry the truth
  p.hyper["adam_t"] = static_cast<double>(opt.t);
  for (const auto& [name, tensor] : opt.m) p.params["m." + name] = tensor;
  for (const auto& [name, tensor] : opt.v) p.params["v." + name] = tensor;
  return p;
}

AdamState unpack_adam(const PolicyParameters& p) {
  AdamState opt;
  opt.t = static_cast<long long>(p.hyper.count("adam_t") ? p.hyper.at("adam_t") : 0);
  for (const auto& [name, tensor] : p.params) {
    if (name.rfind("m.", 0) == 0) opt.m[name.substr(2)] = tensor;
    if (name.rfind("v.", 0) == 0) opt.v[name.substr(2)] = tensor;
  }
  return opt;
}

}  // namespace

void save_train_state(const std::filesystem::path& dir, const TrainState& state,
                      Architecture arch) {
  const std::string tag = to_string(arch);
  std::filesystem::create_directories(dir);

  PolicyParameters actor = state.actor;
  actor.hyper["trained_epochs"] = static_cast<double>(state.epochs_done);
  save_checkpoint(dir / (tag + "_last.json"), actor);

  PolicyParameters best = state.best_actor;
  best.hyper["probe_eta"] = state.best_probe_eta;
  save_checkpoint(dir / (tag + "_best.json"), best);

  save_checkpoint(dir / "critic_last.json", state.critic);
  save_checkpoint(dir / (tag + "_optim.json"), pack_adam(state.actor_opt));
  save_checkpoint(dir / "critic_optim.json", pack_adam(state.critic_opt));
  write_curve_csv(dir / "curve.csv", state.curve);
}

std::optional<TrainState> load_train_state(const std::filesystem::path& dir,
                                           Architecture arch) {
  const std::string tag = to_string(arch);
  const auto actor_path = dir / (tag + "_last.json");
  if (!std::filesystem::exists(actor_path)) return std::nullopt;

  TrainState st;
  st.actor = load_checkpoint(actor_path);
  st.epochs_done = st.actor.hyper.count("trained_epochs")
                       ? static_cast<int>(st.actor.hyper.at("trained_epochs"))
                       : 0;
  st.actor.hyper.erase("trained_epochs");
  st.best_actor = load_checkpoint(dir / (tag + "_best.json"));
  if (st.best_actor.hyper.count("probe_eta")) {
    st.best_probe_eta = st.best_actor.hyper.at("probe_eta");
    st.best_actor.hyper.erase("probe_eta");
  }
  st.critic = load_checkpoint(dir / "critic_last.json");
  st.actor_opt = unpack_adam(load_checkpoint(dir / (tag + "_optim.json")));
  st.critic_opt = unpack_adam(load_checkpoint(dir / "critic_optim.json"));

  const auto curve_path = dir / "curve.csv";
  if (std::filesystem::exists(curve_path)) {
    const auto lines = read_lines(curve_path);
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
      if (cols.size() != 8) throw std::runtime_error("bad curve row: " + lines[i]);
      EpochStats e;
      e.epoch = std::stoi(cols[0]);
      e.probe_eta_mean = parse_double(cols[1]);
      e.probe_timeouts = std::stoi(cols[2]);
      e.policy_loss = parse_double(cols[3]);
      e.value_loss = parse_double(cols[4]);
      e.entropy = parse_double(cols[5]);
      e.clip_fraction = parse_double(cols[6]);
      e.mean_ratio = parse_double(cols[7]);
      st.curve.push_back(e);
    }
  }
  return st;
}

void write_curve_csv(const std::filesystem::path& path,
                     const std::vector<EpochStats>& curve) {
  atomic_write(path, [&](std::ostream& out) {
    out << "epoch,probe_eta_mean,probe_timeouts,policy_loss,value_loss,entropy,"
           "clip_fraction,mean_ratio\n";
    for (const auto& e : curve) {
      out << e.epoch << ',' << format_double(e.probe_eta_mean) << ','
          << e.probe_timeouts << ',' << format_double(e.policy_loss) << ','
          << format_double(e.value_loss) << ',' << format_double(e.entropy)
          << ',' << format_double(e.clip_fraction) << ','
          << format_double(e.mean_ratio) << "\n";
    }
  });
}

}  // namespace mrta
