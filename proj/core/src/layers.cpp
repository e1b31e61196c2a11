#include "dualspeech/layers.hpp"

#include <cmath>

#include "dualspeech/ops.hpp"

namespace dualspeech {

Tensor maybe_dropout(const Tensor& x, double rate, const ForwardContext& ctx) {
  if (!ctx.training() || rate <= 0.0) return x;
  return ops::dropout(x, rate, *ctx.rng);
}

Tensor uniform_parameter(const Shape& shape, double limit, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<double> data(numel(shape));
  for (double& v : data) v = dist(rng);
  return Tensor::from(shape, std::move(data), true);
}

Tensor normal_parameter(const Shape& shape, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> data(numel(shape));
  for (double& v : data) v = dist(rng);
  return Tensor::from(shape, std::move(data), true);
}

Linear Linear::init(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  return {uniform_parameter({in, out}, limit, rng), Tensor::zeros({out}, true)};
}

Linear Linear::zeros(std::size_t in, std::size_t out) {
  return {Tensor::zeros({in, out}, true), Tensor::zeros({out}, true)};
}

Tensor Linear::operator()(const Tensor& x) const { return ops::add_bias(ops::matmul(x, weight), bias); }

void Linear::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

LayerNorm LayerNorm::init(std::size_t width) {
  return {Tensor::full({width}, 1.0, true), Tensor::zeros({width}, true)};
}

Tensor LayerNorm::operator()(const Tensor& x) const { return ops::layer_norm(x, gain, bias); }

void LayerNorm::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".gain", gain});
  out.push_back({prefix + ".bias", bias});
}

}  // namespace dualspeech
