#pragma once

// Central finite-difference oracle for the gradient tests. It only touches
// tensor values and the scalar output, never the backward kernels.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "dualspeech/ops.hpp"
#include "dualspeech/tensor.hpp"

namespace dualspeech::testing {

using ScalarFn = std::function<Tensor(const std::vector<Tensor>&)>;

inline Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0,
                            double hi = 1.0, bool requires_grad = true) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> data(numel(shape));
  for (double& v : data) v = dist(rng);
  return Tensor::from(shape, std::move(data), requires_grad);
}

inline std::vector<double> numeric_gradient(const ScalarFn& fn, std::vector<Tensor>& inputs,
                                            std::size_t which, double h = 1e-5) {
  NoGradGuard guard;
  auto values = inputs[which].mutable_data();
  std::vector<double> grad(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + h;
    const double up = fn(inputs).item();
    values[i] = saved - h;
    const double down = fn(inputs).item();
    values[i] = saved;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

/// ||analytic - numeric|| / max(||analytic||, ||numeric||), worst over inputs
/// that require grad.
inline double max_relative_error(const ScalarFn& fn, std::vector<Tensor> inputs, double h = 1e-5) {
  for (auto& t : inputs)
    if (t.requires_grad()) t.zero_grad();
  backward(fn(inputs));
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    if (!inputs[k].requires_grad()) continue;
    const std::vector<double> analytic(inputs[k].grad().begin(), inputs[k].grad().end());
    const std::vector<double> numeric = numeric_gradient(fn, inputs, k, h);
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
      na += analytic[i] * analytic[i];
      nn += numeric[i] * numeric[i];
    }
    const double denom = std::max({std::sqrt(na), std::sqrt(nn), 1e-12});
    worst = std::max(worst, std::sqrt(diff) / denom);
  }
  return worst;
}

/// Weighted sum with fixed random weights so every output element matters.
inline Tensor weighted_sum(const Tensor& x, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  Tensor w = random_tensor(x.shape(), rng, -1.0, 1.0, false);
  return ops::sum(ops::mul(x, w));
}

}  // namespace dualspeech::testing
