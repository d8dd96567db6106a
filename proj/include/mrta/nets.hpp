#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mrta/rng.hpp"

namespace mrta {

struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<int> s, double fill = 0.0);
  int size() const { return static_cast<int>(data.size()); }
};

using ParamMap = std::map<std::string, Tensor>;

// N(0, 1/sqrt(fan_in)) weight init
Tensor init_linear(Rng& rng, int rows, int cols);

double softplus(double x);
double sigmoid(double x);

// y = W x + b, W row-major (rows x cols)
void linear_forward(const Tensor& w, const Tensor& b, const double* x, double* y);
// accumulates dW, db and writes dx (dx may be null)
void linear_backward(const Tensor& w, const double* x, const double* dy,
                     Tensor& dw, Tensor& db, double* dx);

void tanh_inplace(double* x, int n);

ParamMap zeros_like(const ParamMap& params);
void add_scaled(ParamMap& dst, const ParamMap& src, double scale);
double max_abs_diff(const ParamMap& a, const ParamMap& b);

struct AdamState {
  ParamMap m, v;
  long long t = 0;
};

void adam_step(ParamMap& params, const ParamMap& grads, AdamState& state,
               double lr, double beta1 = 0.9, double beta2 = 0.999,
               double eps = 1e-8);

}  // namespace mrta
