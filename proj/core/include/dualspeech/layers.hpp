#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "dualspeech/tensor.hpp"

namespace dualspeech {

struct NamedParameter {
  std::string name;
  Tensor tensor;
};
using ParameterList = std::vector<NamedParameter>;

/// Per-forward-pass settings. A null rng means inference: no dropout.
struct ForwardContext {
  std::mt19937_64* rng = nullptr;
  bool training() const { return rng != nullptr; }
};

Tensor maybe_dropout(const Tensor& x, double rate, const ForwardContext& ctx);

/// Glorot-uniform weights, zero bias.
struct Linear {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]

  static Linear init(std::size_t in, std::size_t out, std::mt19937_64& rng);
  static Linear zeros(std::size_t in, std::size_t out);
  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, ParameterList& out) const;
};

struct LayerNorm {
  Tensor gain;
  Tensor bias;

  static LayerNorm init(std::size_t width);
  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, ParameterList& out) const;
};

/// Uniform(-limit, limit) tensor with requires_grad set.
Tensor uniform_parameter(const Shape& shape, double limit, std::mt19937_64& rng);
/// Normal(0, stddev) tensor with requires_grad set.
Tensor normal_parameter(const Shape& shape, double stddev, std::mt19937_64& rng);

}  // namespace dualspeech
