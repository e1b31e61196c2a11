#include "dualspeech/optim.hpp"

#include <algorithm>
#include <cmath>

#include "dualspeech/error.hpp"

namespace dualspeech {

double lr_schedule(std::uint64_t step, const AdamConfig& config) {
  DUALSPEECH_EXPECT(step >= 1, "lr_schedule: step must be at least 1");
  DUALSPEECH_EXPECT(config.warmup_steps >= 1 && config.d_model >= 1,
                    "lr_schedule: warmup_steps and d_model must be positive");
  const double s = static_cast<double>(step);
  const double warmup = static_cast<double>(config.warmup_steps);
  const double rate = std::min(1.0 / std::sqrt(s), s / (warmup * std::sqrt(warmup)));
  return config.lr_scale * rate / std::sqrt(static_cast<double>(config.d_model));
}

OptimizerState OptimizerState::for_parameters(std::span<const Tensor> params,
                                              const AdamConfig& config) {
  OptimizerState state;
  state.config = config;
  for (const Tensor& p : params) {
    state.first_moment.emplace_back(p.size(), 0.0);
    state.second_moment.emplace_back(p.size(), 0.0);
  }
  return state;
}

void adam_step(std::span<Tensor> params, OptimizerState& state) {
  DUALSPEECH_EXPECT(params.size() == state.first_moment.size() &&
                        params.size() == state.second_moment.size(),
                    "adam_step: parameter count does not match optimizer state");
  for (std::size_t i = 0; i < params.size(); ++i)
    DUALSPEECH_EXPECT(params[i].size() == state.first_moment[i].size() &&
                          params[i].size() == state.second_moment[i].size(),
                      "adam_step: parameter shape does not match optimizer state");
  const AdamConfig& c = state.config;
  const std::uint64_t step = state.step + 1;
  const double lr = lr_schedule(step, c);
  const double correction1 = 1.0 - std::pow(c.beta1, static_cast<double>(step));
  const double correction2 = 1.0 - std::pow(c.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto value = params[i].mutable_data();
    const auto grad = params[i].grad();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t j = 0; j < value.size(); ++j) {
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * grad[j];
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * grad[j] * grad[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      value[j] -= lr * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
  state.step = step;
}

}  // namespace dualspeech
