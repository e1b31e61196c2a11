#pragma once

// Gradient-check cases for every differentiable kernel, three input shapes
// each. Shared by the unit tests and the acceptance suite.

#include <cstdint>
#include <string>
#include <vector>

#include "dualspeech/ops.hpp"
#include "gradcheck.hpp"

namespace dualspeech::testing {

struct KernelCase {
  std::string kernel;
  std::string shape;
  ScalarFn fn;
  std::vector<Tensor> inputs;
};

inline std::vector<KernelCase> kernel_cases(std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  std::vector<KernelCase> cases;
  auto rnd = [&rng](const Shape& s, double lo = -1.0, double hi = 1.0) {
    return random_tensor(s, rng, lo, hi);
  };
  // Keep ReLU inputs away from the kink at 0.
  auto away_from_zero = [&rng](const Shape& s) {
    Tensor t = random_tensor(s, rng, 0.1, 1.0);
    std::bernoulli_distribution sign(0.5);
    for (double& v : t.mutable_data()) v = sign(rng) ? v : -v;
    return t;
  };

  const std::vector<std::pair<Shape, std::size_t>> mm = {{{3, 4}, 5}, {{2, 3, 6}, 2}, {{1, 7}, 1}};
  for (const auto& [xs, n] : mm) {
    cases.push_back({"matmul", shape_string(xs),
                     [](const std::vector<Tensor>& in) { return weighted_sum(ops::matmul(in[0], in[1])); },
                     {rnd(xs), rnd({xs.back(), n})}});
    cases.push_back({"matmul_transposed", shape_string(xs),
                     [](const std::vector<Tensor>& in) {
                       return weighted_sum(ops::matmul_transposed(in[0], in[1]));
                     },
                     {rnd(xs), rnd({n, xs.back()})}});
  }
  for (const Shape& s : std::vector<Shape>{{5}, {3, 4}, {2, 3, 7}}) {
    cases.push_back({"softmax", shape_string(s),
                     [](const std::vector<Tensor>& in) { return weighted_sum(ops::softmax(in[0])); },
                     {rnd(s, -3.0, 3.0)}});
    cases.push_back({"sigmoid", shape_string(s),
                     [](const std::vector<Tensor>& in) { return weighted_sum(ops::sigmoid(in[0])); },
                     {rnd(s, -4.0, 4.0)}});
    cases.push_back({"tanh", shape_string(s),
                     [](const std::vector<Tensor>& in) { return weighted_sum(ops::tanh(in[0])); },
                     {rnd(s, -2.0, 2.0)}});
    cases.push_back({"relu", shape_string(s),
                     [](const std::vector<Tensor>& in) { return weighted_sum(ops::relu(in[0])); },
                     {away_from_zero(s)}});
    cases.push_back({"layer_norm", shape_string(s),
                     [](const std::vector<Tensor>& in) {
                       return weighted_sum(ops::layer_norm(in[0], in[1], in[2]));
                     },
                     {rnd(s, -2.0, 2.0), rnd({s.back()}, 0.5, 1.5), rnd({s.back()})}});
    cases.push_back({"add_bias", shape_string(s),
                     [](const std::vector<Tensor>& in) { return weighted_sum(ops::add_bias(in[0], in[1])); },
                     {rnd(s), rnd({s.back()})}});
    cases.push_back({"mul", shape_string(s),
                     [](const std::vector<Tensor>& in) { return weighted_sum(ops::mul(in[0], in[1])); },
                     {rnd(s), rnd(s)}});
  }
  const std::vector<Shape> conv_shapes = {{1, 6, 2}, {2, 5, 3}, {3, 9, 4}};
  const std::vector<std::size_t> kernels = {3, 5, 1};
  for (std::size_t i = 0; i < conv_shapes.size(); ++i) {
    const Shape& s = conv_shapes[i];
    cases.push_back({"conv1d", shape_string(s),
                     [](const std::vector<Tensor>& in) {
                       return weighted_sum(ops::conv1d(in[0], in[1], in[2]));
                     },
                     {rnd(s), rnd({kernels[i], s[2], 3}), rnd({3})}});
  }
  const std::vector<std::tuple<std::size_t, std::size_t, std::size_t, std::vector<std::int32_t>>> emb = {
      {5, 3, 1, {0, 2, 2, 4}}, {7, 2, 2, {6, 0, ops::kZeroRow, 1, 3, 3}}, {3, 4, 1, {1}}};
  for (const auto& [vocab, d, batch, ids] : emb) {
    const std::size_t time = ids.size() / batch;
    cases.push_back({"embedding", shape_string({vocab, d}),
                     [ids = ids, batch = batch, time](const std::vector<Tensor>& in) {
                       return weighted_sum(ops::embedding(in[0], ids, batch, time));
                     },
                     {rnd({vocab, d})}});
  }
  const std::vector<std::pair<Shape, std::vector<std::size_t>>> seq = {
      {{1, 3, 2}, {3}}, {{2, 4, 3}, {4, 2}}, {{3, 5, 1}, {1, 5, 3}}};
  for (const auto& [s, lens] : seq) {
    cases.push_back({"mse_masked", shape_string(s),
                     [lens = lens](const std::vector<Tensor>& in) {
                       return ops::mse_masked(in[0], in[1], lens);
                     },
                     {rnd(s), rnd(s)}});
    std::vector<std::int32_t> targets(s[0] * s[1]);
    std::vector<double> stop(s[0] * s[1]);
    for (std::size_t i = 0; i < targets.size(); ++i) {
      targets[i] = static_cast<std::int32_t>((i * 7 + 3) % 4);
      stop[i] = (i % 3 == 0) ? 1.0 : 0.0;
    }
    cases.push_back({"nll_masked", shape_string(s),
                     [lens = lens, targets](const std::vector<Tensor>& in) {
                       return ops::nll_masked(in[0], targets, lens);
                     },
                     {rnd({s[0], s[1], 4}, -2.0, 2.0)}});
    cases.push_back({"bce_masked", shape_string(s),
                     [lens = lens, stop](const std::vector<Tensor>& in) {
                       return ops::bce_masked(in[0], stop, lens, 5.0);
                     },
                     {rnd({s[0], s[1], 1}, 0.1, 0.9)}});
    cases.push_back({"shift_right", shape_string(s),
                     [](const std::vector<Tensor>& in) { return weighted_sum(ops::shift_right(in[0], in[1])); },
                     {rnd(s), rnd({s[2]})}});
    cases.push_back({"mask_time", shape_string(s),
                     [lens = lens](const std::vector<Tensor>& in) {
                       return weighted_sum(ops::mask_time(in[0], lens));
                     },
                     {rnd(s)}});
  }
  struct AttnCase {
    std::size_t batch, lq, lk, width, heads;
    bool causal;
    std::vector<std::size_t> key_lengths;
  };
  const std::vector<AttnCase> attn = {{1, 3, 3, 4, 1, true, {3}},
                                      {2, 2, 5, 6, 2, false, {5, 3}},
                                      {2, 4, 4, 8, 4, true, {4, 2}}};
  for (const auto& a : attn) {
    cases.push_back({"attention", shape_string({a.batch, a.lq, a.lk, a.width}),
                     [a](const std::vector<Tensor>& in) {
                       return weighted_sum(ops::attention(in[0], in[1], in[2], a.heads,
                                                          a.key_lengths, a.causal));
                     },
                     {rnd({a.batch, a.lq, a.width}), rnd({a.batch, a.lk, a.width}),
                      rnd({a.batch, a.lk, a.width})}});
  }
  return cases;
}

}  // namespace dualspeech::testing
