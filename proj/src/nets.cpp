#include "mrta/nets.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mrta {

Tensor::Tensor(std::vector<int> s, double fill) : shape(std::move(s)) {
  int n = 1;
  for (int d : shape) n *= d;
  data.assign(n, fill);
}

Tensor init_linear(Rng& rng, int rows, int cols) {
  Tensor t({rows, cols});
  const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
  for (auto& v : t.data) v = rng.normal() * scale;
  return t;
}

double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void linear_forward(const Tensor& w, const Tensor& b, const double* x, double* y) {
  const int rows = w.shape[0], cols = w.shape[1];
  for (int r = 0; r < rows; ++r) {
    const double* wr = w.data.data() + static_cast<std::size_t>(r) * cols;
    double acc = b.data[r];
    for (int c = 0; c < cols; ++c) acc += wr[c] * x[c];
    y[r] = acc;
  }
}

void linear_backward(const Tensor& w, const double* x, const double* dy,
                     Tensor& dw, Tensor& db, double* dx) {
  const int rows = w.shape[0], cols = w.shape[1];
  if (dx)
    for (int c = 0; c < cols; ++c) dx[c] = 0.0;
  for (int r = 0; r < rows; ++r) {
    const double g = dy[r];
    db.data[r] += g;
    double* dwr = dw.data.data() + static_cast<std::size_t>(r) * cols;
    const double* wr = w.data.data() + static_cast<std::size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) {
      dwr[c] += g * x[c];
      if (dx) dx[c] += g * wr[c];
    }
  }
}

void tanh_inplace(double* x, int n) {
  for (int i = 0; i < n; ++i) x[i] = std::tanh(x[i]);
}

ParamMap zeros_like(const ParamMap& params) {
  ParamMap out;
  for (const auto& [name, t] : params) out.emplace(name, Tensor(t.shape));
  return out;
}

void add_scaled(ParamMap& dst, const ParamMap& src, double scale) {
  for (auto& [name, t] : dst) {
    const auto it = src.find(name);
    if (it == src.end()) continue;
    for (int i = 0; i < t.size(); ++i) t.data[i] += scale * it->second.data[i];
  }
}

double max_abs_diff(const ParamMap& a, const ParamMap& b) {
  double m = 0.0;
  for (const auto& [name, t] : a) {
    const auto it = b.find(name);
    if (it == b.end()) throw std::invalid_argument("max_abs_diff: key mismatch");
    for (int i = 0; i < t.size(); ++i)
      m = std::max(m, std::abs(t.data[i] - it->second.data[i]));
  }
  return m;
}

void adam_step(ParamMap& params, const ParamMap& grads, AdamState& state,
               double lr, double beta1, double beta2, double eps) {
  if (state.m.empty()) {
    state.m = zeros_like(params);
    state.v = zeros_like(params);
  }
  ++state.t;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (auto& [name, p] : params) {
    const auto git = grads.find(name);
    if (git == grads.end()) continue;
    auto& m = state.m.at(name);
    auto& v = state.v.at(name);
    for (int i = 0; i < p.size(); ++i) {
      const double g = git->second.data[i];
      m.data[i] = beta1 * m.data[i] + (1.0 - beta1) * g;
      v.data[i] = beta2 * v.data[i] + (1.0 - beta2) * g * g;
      const double mhat = m.data[i] / bc1;
      const double vhat = v.data[i] / bc2;
      p.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

}  // namespace mrta
