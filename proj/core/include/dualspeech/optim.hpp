#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dualspeech/tensor.hpp"

namespace dualspeech {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double epsilon = 1e-9;
  std::uint64_t warmup_steps = 4000;
  std::uint64_t d_model = 256;
  // Constant multiplier on the schedule; 1.0 is the plain inverse-sqrt schedule.
  double lr_scale = 1.0;
};

/// d_model^-0.5 * min(step^-0.5, step * warmup^-1.5), times lr_scale.
/// Peaks exactly at step == warmup_steps.
double lr_schedule(std::uint64_t step, const AdamConfig& config);

struct OptimizerState {
  AdamConfig config;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::uint64_t step = 0;

  /// Zero moments shaped like `params`.
  static OptimizerState for_parameters(std::span<const Tensor> params, const AdamConfig& config);
};

/// One bias-corrected Adam update of every parameter from its accumulated
/// gradient, with learning rate lr_schedule(state.step + 1). Increments step.
void adam_step(std::span<Tensor> params, OptimizerState& state);

}  // namespace dualspeech
