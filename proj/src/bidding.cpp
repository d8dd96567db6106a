#include "mrta/bidding.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "mrta/io.hpp"

namespace mrta {

static_assert(std::endian::native == std::endian::little,
              "checkpoint io assumes a little-endian host");

const std::vector<std::string>& feature_spec() {
  static const std::vector<std::string> names = {
      "agent_task_distance", "insertion_cost", "winning_bid",
      "winner_is_self",      "winner_is_none", "task_x",
      "task_y",              "bundle_fill"};
  return names;
}

std::string to_string(Architecture arch) {
  switch (arch) {
    case Architecture::classic: return "classic";
    case Architecture::nam: return "nam";
    case Architecture::lstm: return "lstm";
    case Architecture::critic: return "critic";
  }
  throw std::logic_error("bad architecture tag");
}

Architecture architecture_from_string(const std::string& s) {
  if (s == "classic") return Architecture::classic;
  if (s == "nam") return Architecture::nam;
  if (s == "lstm") return Architecture::lstm;
  if (s == "critic") return Architecture::critic;
  throw std::invalid_argument("unknown architecture: " + s);
}

int PolicyParameters::hyper_int(const std::string& key) const {
  const auto it = hyper.find(key);
  if (it == hyper.end())
    throw std::invalid_argument("missing hyperparameter: " + key);
  return static_cast<int>(it->second);
}

double PolicyParameters::log_std() const {
  return params.at("log_std").data[0];
}

// ---------------------------------------------------------------------------

Observation build_observation(const AgentState& state, const WorldInstance& world) {
  const double diag = world.diagonal();
  const double side = world.workspace_side;
  const Point2& pos = world.agents[state.agent_id];
  const int n_t = world.n_tasks();

  std::vector<char> on_route(n_t, 0);
  for (int t : state.path.tasks) on_route[t] = 1;

  Observation obs;
  obs.n_tasks = n_t;
  obs.features.resize(static_cast<std::size_t>(n_t) * kFeatureCount);
  const double fill =
      static_cast<double>(state.bundle.size()) / static_cast<double>(world.capacity);
  for (int j = 0; j < n_t; ++j) {
    const Point2& q = world.tasks[j];
    obs.at(j, 0) = distance(pos, q) / diag;
    obs.at(j, 1) = on_route[j]
                       ? 0.0
                       : cheapest_insertion_unchecked(pos, state.path.tasks, j, world)
                                 .delta /
                             diag;
    obs.at(j, 2) = std::clamp(state.winning_bids[j], 0.0, 1.0);
    obs.at(j, 3) = state.winners[j] == state.agent_id ? 1.0 : 0.0;
    obs.at(j, 4) = state.winners[j] == kNoWinner ? 1.0 : 0.0;
    obs.at(j, 5) = q.x / side;
    obs.at(j, 6) = q.y / side;
    obs.at(j, 7) = fill;
  }
  return obs;
}

BidVector classic_bid(const AgentState& state, const WorldInstance& world) {
  const double sigma = world.diagonal();
  const Point2& pos = world.agents[state.agent_id];
  const int n_t = world.n_tasks();
  std::vector<char> on_route(n_t, 0);
  for (int t : state.path.tasks) on_route[t] = 1;

  // Scores stay non-increasing along the bundle: later bids never exceed the
  // weakest standing claim. Without this cap, insertion costs shrinking as
  // the route grows let agents escalate and steal in cycles.
  double cap = std::numeric_limits<double>::infinity();
  for (int t : state.bundle) cap = std::min(cap, state.winning_bids[t]);

  BidVector bids(n_t);
  for (int j = 0; j < n_t; ++j) {
    const double delta =
        on_route[j]
            ? 0.0
            : cheapest_insertion_unchecked(pos, state.path.tasks, j, world).delta;
    bids[j] = std::min(std::exp(-delta / sigma), cap);
  }
  return bids;
}

// --- NAM --------------------------------------------------------------------

namespace {

std::string nam_key(int k, const char* part) {
  return "g" + std::to_string(k) + "." + part;
}

void check_nam_shapes(const PolicyParameters& p) {
  if (p.arch != Architecture::nam)
    throw std::invalid_argument("expected nam parameters");
  const int u = p.hyper_int("units");
  for (int k = 0; k < kFeatureCount; ++k) {
    auto need = [&](const char* part, std::vector<int> shape) {
      const auto it = p.params.find(nam_key(k, part));
      if (it == p.params.end() || it->second.shape != shape)
        throw std::invalid_argument("nam parameter missing or misshaped: " +
                                    nam_key(k, part));
    };
    need("w1", {u, 1});
    need("b1", {u});
    need("w2", {u, u});
    need("b2", {u});
    need("w3", {1, u});
    need("b3", {1});
  }
  if (!p.params.count("output_bias") || !p.params.count("log_std"))
    throw std::invalid_argument("nam parameters missing output head");
}

}  // namespace

PolicyParameters nam_init(std::uint64_t seed, int units) {
  Rng rng(derive_seed(seed, "nam-init"));
  PolicyParameters p;
  p.arch = Architecture::nam;
  p.hyper["units"] = units;
  p.features = feature_spec();
  for (int k = 0; k < kFeatureCount; ++k) {
    p.params[nam_key(k, "w1")] = init_linear(rng, units, 1);
    p.params[nam_key(k, "b1")] = Tensor({units});
    p.params[nam_key(k, "w2")] = init_linear(rng, units, units);
    p.params[nam_key(k, "b2")] = Tensor({units});
    p.params[nam_key(k, "w3")] = init_linear(rng, 1, units);
    p.params[nam_key(k, "b3")] = Tensor({1});
  }
  p.params["output_bias"] = Tensor({1});
  p.params["log_std"] = Tensor({1}, -1.6);
  return p;
}

static void nam_run(const PolicyParameters& p, const Observation& obs,
                    BidVector& bids, std::vector<double>* contributions,
                    NamTrace* trace) {
  check_nam_shapes(p);
  const int u = p.hyper_int("units");
  const int n_t = obs.n_tasks;
  const double out_bias = p.params.at("output_bias").data[0];

  if (trace) {
    trace->n_tasks = n_t;
    trace->units = u;
    trace->x = obs.features;
    trace->a1.resize(static_cast<std::size_t>(n_t) * kFeatureCount * u);
    trace->a2.resize(static_cast<std::size_t>(n_t) * kFeatureCount * u);
    trace->pre.resize(n_t);
  }
  if (contributions)
    contributions->assign(static_cast<std::size_t>(n_t) * kFeatureCount, 0.0);

  bids.assign(n_t, 0.0);
  std::vector<double> z1(u), z2(u);
  for (int j = 0; j < n_t; ++j) {
    double sum = out_bias;
    for (int k = 0; k < kFeatureCount; ++k) {
      const double x = obs.at(j, k);
      const Tensor& w1 = p.params.at(nam_key(k, "w1"));
      const Tensor& b1 = p.params.at(nam_key(k, "b1"));
      const Tensor& w2 = p.params.at(nam_key(k, "w2"));
      const Tensor& b2 = p.params.at(nam_key(k, "b2"));
      const Tensor& w3 = p.params.at(nam_key(k, "w3"));
      const Tensor& b3 = p.params.at(nam_key(k, "b3"));
      linear_forward(w1, b1, &x, z1.data());
      tanh_inplace(z1.data(), u);
      linear_forward(w2, b2, z1.data(), z2.data());
      tanh_inplace(z2.data(), u);
      double out = b3.data[0];
      for (int i = 0; i < u; ++i) out += w3.data[i] * z2[i];
      sum += out;
      if (contributions)
        (*contributions)[static_cast<std::size_t>(j) * kFeatureCount + k] = out;
      if (trace) {
        std::copy(z1.begin(), z1.end(),
                  trace->a1.begin() +
                      (static_cast<std::size_t>(j) * kFeatureCount + k) * u);
        std::copy(z2.begin(), z2.end(),
                  trace->a2.begin() +
                      (static_cast<std::size_t>(j) * kFeatureCount + k) * u);
      }
    }
    if (trace) trace->pre[j] = sum;
    bids[j] = softplus(sum);
  }
}

BidVector nam_forward(const PolicyParameters& params, const Observation& obs) {
  BidVector bids;
  nam_run(params, obs, bids, nullptr, nullptr);
  return bids;
}

std::vector<double> nam_contributions(const PolicyParameters& params,
                                      const Observation& obs) {
  BidVector bids;
  std::vector<double> contributions;
  nam_run(params, obs, bids, &contributions, nullptr);
  return contributions;
}

BidVector nam_forward_cached(const PolicyParameters& params,
                             const Observation& obs, NamTrace& trace) {
  BidVector bids;
  nam_run(params, obs, bids, nullptr, &trace);
  return bids;
}

void nam_backward(const PolicyParameters& p, const NamTrace& trace,
                  const std::vector<double>& dbids, ParamMap& grad) {
  const int u = trace.units;
  const int n_t = trace.n_tasks;
  if (static_cast<int>(dbids.size()) != n_t)
    throw std::invalid_argument("nam_backward: gradient length mismatch");

  std::vector<double> da2(u), da1(u), dz2(u), dz1(u);
  for (int j = 0; j < n_t; ++j) {
    const double dpre = dbids[j] * sigmoid(trace.pre[j]);
    grad.at("output_bias").data[0] += dpre;
    for (int k = 0; k < kFeatureCount; ++k) {
      const std::size_t base = (static_cast<std::size_t>(j) * kFeatureCount + k) * u;
      const double* a1 = trace.a1.data() + base;
      const double* a2 = trace.a2.data() + base;
      const double x = trace.x[static_cast<std::size_t>(j) * kFeatureCount + k];
      const Tensor& w2 = p.params.at(nam_key(k, "w2"));
      const Tensor& w3 = p.params.at(nam_key(k, "w3"));

      // out = w3 a2 + b3
      grad.at(nam_key(k, "b3")).data[0] += dpre;
      auto& dw3 = grad.at(nam_key(k, "w3"));
      for (int i = 0; i < u; ++i) {
        dw3.data[i] += dpre * a2[i];
        da2[i] = dpre * w3.data[i] * (1.0 - a2[i] * a2[i]);
      }
      // a2 = tanh(w2 a1 + b2)
      linear_backward(w2, a1, da2.data(), grad.at(nam_key(k, "w2")),
                      grad.at(nam_key(k, "b2")), da1.data());
      for (int i = 0; i < u; ++i) da1[i] *= 1.0 - a1[i] * a1[i];
      // a1 = tanh(w1 x + b1)
      auto& dw1 = grad.at(nam_key(k, "w1"));
      auto& db1 = grad.at(nam_key(k, "b1"));
      for (int i = 0; i < u; ++i) {
        dw1.data[i] += da1[i] * x;
        db1.data[i] += da1[i];
      }
    }
  }
}

// --- LSTM ---------------------------------------------------------------------

namespace {

void check_lstm_shapes(const PolicyParameters& p) {
  if (p.arch != Architecture::lstm)
    throw std::invalid_argument("expected lstm parameters");
  const int h = p.hyper_int("hidden");
  const int hd = p.hyper_int("head");
  auto need = [&](const std::string& name, std::vector<int> shape) {
    const auto it = p.params.find(name);
    if (it == p.params.end() || it->second.shape != shape)
      throw std::invalid_argument("lstm parameter missing or misshaped: " + name);
  };
  need("lstm.w_x", {4 * h, kFeatureCount});
  need("lstm.w_h", {4 * h, h});
  need("lstm.b", {4 * h});
  need("head.w1", {hd, h});
  need("head.b1", {hd});
  need("head.w2", {1, hd});
  need("head.b2", {1});
  need("log_std", {1});
}

}  // namespace

PolicyParameters lstm_init(std::uint64_t seed, int hidden, int head) {
  Rng rng(derive_seed(seed, "lstm-init"));
  PolicyParameters p;
  p.arch = Architecture::lstm;
  p.hyper["hidden"] = hidden;
  p.hyper["head"] = head;
  p.features = feature_spec();
  p.params["lstm.w_x"] = init_linear(rng, 4 * hidden, kFeatureCount);
  p.params["lstm.w_h"] = init_linear(rng, 4 * hidden, hidden);
  Tensor b({4 * hidden});
  for (int i = hidden; i < 2 * hidden; ++i) b.data[i] = 1.0;  // forget gate open
  p.params["lstm.b"] = std::move(b);
  p.params["head.w1"] = init_linear(rng, head, hidden);
  p.params["head.b1"] = Tensor({head});
  p.params["head.w2"] = init_linear(rng, 1, head);
  p.params["head.b2"] = Tensor({1});
  p.params["log_std"] = Tensor({1}, -1.6);
  return p;
}

RecurrentContext make_context(const PolicyParameters& params, int n_tasks) {
  RecurrentContext ctx;
  if (params.arch != Architecture::lstm) return ctx;
  ctx.n_tasks = n_tasks;
  ctx.hidden = params.hyper_int("hidden");
  ctx.h.assign(static_cast<std::size_t>(n_tasks) * ctx.hidden, 0.0);
  ctx.c.assign(static_cast<std::size_t>(n_tasks) * ctx.hidden, 0.0);
  return ctx;
}

static std::pair<BidVector, RecurrentContext> lstm_run(
    const PolicyParameters& p, const Observation& obs,
    const RecurrentContext& ctx, LstmTrace* trace) {
  check_lstm_shapes(p);
  const int h = p.hyper_int("hidden");
  const int hd = p.hyper_int("head");
  const int n_t = obs.n_tasks;
  if (ctx.n_tasks != n_t || ctx.hidden != h)
    throw std::invalid_argument("lstm context does not match observation");

  const Tensor& wx = p.params.at("lstm.w_x");
  const Tensor& wh = p.params.at("lstm.w_h");
  const Tensor& b = p.params.at("lstm.b");
  const Tensor& hw1 = p.params.at("head.w1");
  const Tensor& hb1 = p.params.at("head.b1");
  const Tensor& hw2 = p.params.at("head.w2");
  const Tensor& hb2 = p.params.at("head.b2");

  RecurrentContext out = ctx;
  BidVector bids(n_t);

  if (trace) {
    trace->n_tasks = n_t;
    trace->hidden = h;
    trace->head = hd;
    trace->x = obs.features;
    trace->h_in = ctx.h;
    trace->c_in = ctx.c;
    trace->gates.resize(static_cast<std::size_t>(n_t) * 4 * h);
    trace->tanh_c.resize(static_cast<std::size_t>(n_t) * h);
    trace->h_out.resize(static_cast<std::size_t>(n_t) * h);
    trace->u1.resize(static_cast<std::size_t>(n_t) * hd);
    trace->u2.resize(n_t);
  }

  std::vector<double> pre(4 * h), hx(4 * h), u1(hd);
  for (int j = 0; j < n_t; ++j) {
    const double* x = obs.features.data() + static_cast<std::size_t>(j) * kFeatureCount;
    const double* h_prev = ctx.h.data() + static_cast<std::size_t>(j) * h;
    const double* c_prev = ctx.c.data() + static_cast<std::size_t>(j) * h;
    linear_forward(wx, b, x, pre.data());
    // add W_h h without touching the bias again
    for (int r = 0; r < 4 * h; ++r) {
      const double* whr = wh.data.data() + static_cast<std::size_t>(r) * h;
      double acc = 0.0;
      for (int c = 0; c < h; ++c) acc += whr[c] * h_prev[c];
      hx[r] = pre[r] + acc;
    }
    double* h_new = out.h.data() + static_cast<std::size_t>(j) * h;
    double* c_new = out.c.data() + static_cast<std::size_t>(j) * h;
    for (int i = 0; i < h; ++i) {
      const double gi = sigmoid(hx[i]);
      const double gf = sigmoid(hx[h + i]);
      const double gg = std::tanh(hx[2 * h + i]);
      const double go = sigmoid(hx[3 * h + i]);
      const double c2 = gf * c_prev[i] + gi * gg;
      const double tc = std::tanh(c2);
      c_new[i] = c2;
      h_new[i] = go * tc;
      if (trace) {
        double* g = trace->gates.data() + static_cast<std::size_t>(j) * 4 * h;
        g[i] = gi;
        g[h + i] = gf;
        g[2 * h + i] = gg;
        g[3 * h + i] = go;
        trace->tanh_c[static_cast<std::size_t>(j) * h + i] = tc;
        trace->h_out[static_cast<std::size_t>(j) * h + i] = h_new[i];
      }
    }
    linear_forward(hw1, hb1, h_new, u1.data());
    tanh_inplace(u1.data(), hd);
    double u2 = hb2.data[0];
    for (int i = 0; i < hd; ++i) u2 += hw2.data[i] * u1[i];
    bids[j] = softplus(u2);
    if (trace) {
      std::copy(u1.begin(), u1.end(),
                trace->u1.begin() + static_cast<std::size_t>(j) * hd);
      trace->u2[j] = u2;
    }
  }
  return {std::move(bids), std::move(out)};
}

std::pair<BidVector, RecurrentContext> lstm_forward(
    const PolicyParameters& params, const Observation& obs,
    const RecurrentContext& ctx) {
  return lstm_run(params, obs, ctx, nullptr);
}

std::pair<BidVector, RecurrentContext> lstm_forward_cached(
    const PolicyParameters& params, const Observation& obs,
    const RecurrentContext& ctx, LstmTrace& trace) {
  return lstm_run(params, obs, ctx, &trace);
}

void lstm_backward(const PolicyParameters& p, const LstmTrace& trace,
                   const std::vector<double>& dbids, ParamMap& grad) {
  const int h = trace.hidden;
  const int hd = trace.head;
  const int n_t = trace.n_tasks;
  if (static_cast<int>(dbids.size()) != n_t)
    throw std::invalid_argument("lstm_backward: gradient length mismatch");

  const Tensor& hw1 = p.params.at("head.w1");
  const Tensor& hw2 = p.params.at("head.w2");

  std::vector<double> du1(hd), dh(h), dpre(4 * h);
  for (int j = 0; j < n_t; ++j) {
    const double* u1 = trace.u1.data() + static_cast<std::size_t>(j) * hd;
    const double* gates = trace.gates.data() + static_cast<std::size_t>(j) * 4 * h;
    const double* tanh_c = trace.tanh_c.data() + static_cast<std::size_t>(j) * h;
    const double* h_out = trace.h_out.data() + static_cast<std::size_t>(j) * h;
    const double* h_in = trace.h_in.data() + static_cast<std::size_t>(j) * h;
    const double* c_in = trace.c_in.data() + static_cast<std::size_t>(j) * h;
    const double* x = trace.x.data() + static_cast<std::size_t>(j) * kFeatureCount;

    const double du2 = dbids[j] * sigmoid(trace.u2[j]);
    grad.at("head.b2").data[0] += du2;
    auto& dhw2 = grad.at("head.w2");
    for (int i = 0; i < hd; ++i) {
      dhw2.data[i] += du2 * u1[i];
      du1[i] = du2 * hw2.data[i] * (1.0 - u1[i] * u1[i]);
    }
    linear_backward(hw1, h_out, du1.data(), grad.at("head.w1"),
                    grad.at("head.b1"), dh.data());

    for (int i = 0; i < h; ++i) {
      const double gi = gates[i];
      const double gf = gates[h + i];
      const double gg = gates[2 * h + i];
      const double go = gates[3 * h + i];
      const double dho = dh[i];
      const double dgo = dho * tanh_c[i];
      const double dc = dho * go * (1.0 - tanh_c[i] * tanh_c[i]);
      const double dgf = dc * c_in[i];
      const double dgi = dc * gg;
      const double dgg = dc * gi;
      dpre[i] = dgi * gi * (1.0 - gi);
      dpre[h + i] = dgf * gf * (1.0 - gf);
      dpre[2 * h + i] = dgg * (1.0 - gg * gg);
      dpre[3 * h + i] = dgo * go * (1.0 - go);
    }
    auto& dwx = grad.at("lstm.w_x");
    auto& dwh = grad.at("lstm.w_h");
    auto& db = grad.at("lstm.b");
    for (int r = 0; r < 4 * h; ++r) {
      const double g = dpre[r];
      db.data[r] += g;
      double* dwxr = dwx.data.data() + static_cast<std::size_t>(r) * kFeatureCount;
      for (int c = 0; c < kFeatureCount; ++c) dwxr[c] += g * x[c];
      double* dwhr = dwh.data.data() + static_cast<std::size_t>(r) * h;
      for (int c = 0; c < h; ++c) dwhr[c] += g * h_in[c];
    }
  }
}

// --- policy entry point -------------------------------------------------------

double gaussian_log_prob(const BidVector& sample, const BidVector& mean,
                         double log_std) {
  if (sample.size() != mean.size())
    throw std::invalid_argument("gaussian_log_prob: length mismatch");
  const double sigma = std::exp(log_std);
  const double log_norm = log_std + 0.5 * std::log(2.0 * M_PI);
  double lp = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double z = (sample[i] - mean[i]) / sigma;
    lp += -0.5 * z * z - log_norm;
  }
  return lp;
}

namespace {

PolicySample policy_bid_obs(const PolicyParameters& params,
                            const Observation& obs, RecurrentContext* ctx,
                            bool stochastic, Rng* rng) {
  PolicySample out;
  switch (params.arch) {
    case Architecture::classic:
      throw std::invalid_argument("classic policy has no parameterized form");
    case Architecture::nam:
      out.bids = nam_forward(params, obs);
      break;
    case Architecture::lstm: {
      if (!ctx) throw std::invalid_argument("lstm policy requires a context");
      auto [bids, next] = lstm_forward(params, obs, *ctx);
      out.bids = std::move(bids);
      *ctx = std::move(next);
      break;
    }
    case Architecture::critic:
      throw std::invalid_argument("critic parameters are not a bidding policy");
  }
  if (stochastic) {
    if (!rng) throw std::invalid_argument("stochastic mode requires an rng");
    const double sigma = std::exp(params.log_std());
    BidVector mean = out.bids;
    for (auto& v : out.bids) {
      v += sigma * rng->normal();
      if (!std::isfinite(v)) v = std::clamp(v, -1e9, 1e9);
    }
    out.log_prob = gaussian_log_prob(out.bids, mean, params.log_std());
  }
  return out;
}

}  // namespace

PolicySample policy_bid(const PolicyParameters& params, const AgentState& state,
                        const WorldInstance& world, RecurrentContext* ctx,
                        bool stochastic, Rng* rng) {
  if (params.arch == Architecture::classic) {
    PolicySample out;
    out.bids = classic_bid(state, world);
    return out;
  }
  const Observation obs = build_observation(state, world);
  return policy_bid_obs(params, obs, ctx, stochastic, rng);
}

// --- checkpoint io --------------------------------------------------------------

void save_checkpoint(const std::filesystem::path& manifest_path,
                     const PolicyParameters& p) {
  std::filesystem::path bin_path = manifest_path;
  bin_path.replace_extension(".bin");

  nlohmann::ordered_json manifest;
  manifest["architecture"] = to_string(p.arch);
  nlohmann::ordered_json hyper = nlohmann::ordered_json::object();
  for (const auto& [k, v] : p.hyper) hyper[k] = v;
  manifest["hyperparameters"] = hyper;
  manifest["feature_spec"] = p.features;
  manifest["data_file"] = bin_path.filename().string();

  nlohmann::ordered_json plist = nlohmann::ordered_json::array();
  std::size_t offset = 0;
  std::vector<float> blob;
  for (const auto& [name, t] : p.params) {
    nlohmann::ordered_json entry;
    entry["name"] = name;
    entry["shape"] = t.shape;
    entry["offset"] = offset;
    plist.push_back(entry);
    for (double v : t.data) blob.push_back(static_cast<float>(v));
    offset += t.data.size() * sizeof(float);
  }
  manifest["parameters"] = plist;

  atomic_write(bin_path, [&](std::ostream& out) {
    out.write(reinterpret_cast<const char*>(blob.data()),
              static_cast<std::streamsize>(blob.size() * sizeof(float)));
  });
  atomic_write(manifest_path,
               [&](std::ostream& out) { out << manifest.dump(2) << "\n"; });
}

PolicyParameters load_checkpoint(const std::filesystem::path& manifest_path) {
  nlohmann::json manifest = nlohmann::json::parse(read_file(manifest_path));
  PolicyParameters p;
  p.arch = architecture_from_string(manifest.at("architecture").get<std::string>());
  for (const auto& [k, v] : manifest.at("hyperparameters").items())
    p.hyper[k] = v.get<double>();
  p.features = manifest.at("feature_spec").get<std::vector<std::string>>();

  const std::filesystem::path bin_path =
      manifest_path.parent_path() / manifest.at("data_file").get<std::string>();
  const std::string blob = read_file(bin_path);

  std::size_t expected_end = 0;
  for (const auto& entry : manifest.at("parameters")) {
    const std::string name = entry.at("name").get<std::string>();
    Tensor t;
    t.shape = entry.at("shape").get<std::vector<int>>();
    std::size_t count = 1;
    for (int d : t.shape) count *= static_cast<std::size_t>(d);
    const std::size_t offset = entry.at("offset").get<std::size_t>();
    if (offset + count * sizeof(float) > blob.size())
      throw std::runtime_error("checkpoint data truncated: " + name);
    t.data.resize(count);
    const char* src = blob.data() + offset;
    for (std::size_t i = 0; i < count; ++i) {
      float f;
      std::memcpy(&f, src + i * sizeof(float), sizeof(float));
      t.data[i] = static_cast<double>(f);
    }
    expected_end = std::max(expected_end, offset + count * sizeof(float));
    p.params.emplace(std::move(name), std::move(t));
  }
  if (expected_end != blob.size())
    throw std::runtime_error("checkpoint data has trailing bytes");

  if (p.arch == Architecture::nam) check_nam_shapes(p);
  if (p.arch == Architecture::lstm) check_lstm_shapes(p);
  return p;
}

// --- bidders ---------------------------------------------------------------------

BidVector ClassicBidder::bid(const AgentState& state, const WorldInstance& world,
                             int) {
  return classic_bid(state, world);
}

std::unique_ptr<Bidder> ClassicBidder::clone() const {
  return std::make_unique<ClassicBidder>();
}

NeuralBidder::NeuralBidder(PolicyParameters params)
    : params_(std::make_shared<const PolicyParameters>(std::move(params))) {
  if (params_->arch != Architecture::nam && params_->arch != Architecture::lstm)
    throw std::invalid_argument("neural bidder requires nam or lstm parameters");
}

std::string NeuralBidder::name() const { return to_string(params_->arch); }

void NeuralBidder::begin_world(const WorldInstance& world) {
  contexts_.clear();
  if (params_->arch == Architecture::lstm) {
    contexts_.reserve(world.n_agents());
    for (int i = 0; i < world.n_agents(); ++i)
      contexts_.push_back(make_context(*params_, world.n_tasks()));
  }
  steps_.clear();
}

BidVector NeuralBidder::bid(const AgentState& state, const WorldInstance& world,
                            int iteration) {
  RecurrentContext* ctx = nullptr;
  if (params_->arch == Architecture::lstm) {
    if (contexts_.empty())
      throw std::logic_error("neural bidder used before begin_world");
    ctx = &contexts_[state.agent_id];
  }
  const Observation obs = build_observation(state, world);
  RecurrentContext ctx_before;
  if (stochastic_ && ctx) ctx_before = *ctx;
  PolicySample sample = policy_bid_obs(*params_, obs, ctx, stochastic_,
                                       rng_ ? &*rng_ : nullptr);
  if (stochastic_) {
    RolloutStep step;
    step.agent = state.agent_id;
    step.iteration = iteration;
    step.obs = obs;
    step.ctx = std::move(ctx_before);
    step.action = sample.bids;
    step.log_prob = sample.log_prob;
    steps_.push_back(std::move(step));
  }
  return sample.bids;
}

std::unique_ptr<Bidder> NeuralBidder::clone() const {
  auto copy = std::make_unique<NeuralBidder>(*this);
  copy->contexts_.clear();
  copy->steps_.clear();
  copy->stochastic_ = false;
  copy->rng_.reset();
  return copy;
}

void NeuralBidder::set_stochastic(std::uint64_t seed) {
  stochastic_ = true;
  rng_.emplace(seed);
}

}  // namespace mrta
