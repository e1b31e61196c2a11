#include <cmath>

#include "doctest.h"
#include "dualspeech/error.hpp"
#include "dualspeech/optim.hpp"

using namespace dualspeech;

namespace {

double closed_form(double step, double d, double warmup) {
  return std::pow(d, -0.5) * std::min(std::pow(step, -0.5), step * std::pow(warmup, -1.5));
}

}  // namespace

TEST_CASE("lr_schedule reference points") {
  AdamConfig cfg;
  CHECK(lr_schedule(1, cfg) == doctest::Approx(2.4705e-7).epsilon(1e-4));
  CHECK(lr_schedule(4000, cfg) == doctest::Approx(9.882e-4).epsilon(1e-4));
  CHECK(lr_schedule(16000, cfg) == doctest::Approx(4.941e-4).epsilon(1e-4));
  for (std::uint64_t s : {1u, 7u, 4000u, 12345u})
    CHECK(lr_schedule(s, cfg) == doctest::Approx(closed_form(s, 256, 4000)).epsilon(1e-14));
}

TEST_CASE("lr_schedule rises through warmup then decays") {
  AdamConfig cfg;
  cfg.warmup_steps = 50;
  for (std::uint64_t s = 1; s < 50; ++s) CHECK(lr_schedule(s, cfg) < lr_schedule(s + 1, cfg));
  for (std::uint64_t s = 50; s < 500; ++s) CHECK(lr_schedule(s, cfg) > lr_schedule(s + 1, cfg));
}

TEST_CASE("lr_schedule rejects step zero") {
  CHECK_THROWS_AS(lr_schedule(0, AdamConfig{}), ContractViolation);
}

TEST_CASE("zero gradients leave parameters unchanged") {
  Tensor p = Tensor::from({3}, {0.5, -1.0, 2.0}, true);
  std::vector<Tensor> params{p};
  auto state = OptimizerState::for_parameters(params, AdamConfig{});
  adam_step(params, state);
  CHECK(p.data()[0] == 0.5);
  CHECK(p.data()[1] == -1.0);
  CHECK(p.data()[2] == 2.0);
  CHECK(state.step == 1);
}

TEST_CASE("first step matches the bias-corrected closed form") {
  Tensor p = Tensor::from({1}, {1.0}, true);
  p.mutable_grad()[0] = 1.0;
  std::vector<Tensor> params{p};
  AdamConfig cfg;
  auto state = OptimizerState::for_parameters(params, cfg);
  adam_step(params, state);
  const double m_hat = (1 - 0.9) * 1.0 / (1 - 0.9);
  const double v_hat = (1 - 0.98) * 1.0 / (1 - 0.98);
  const double expected = 1.0 - closed_form(1, 256, 4000) * m_hat / (std::sqrt(v_hat) + 1e-9);
  CHECK(p.data()[0] == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("moments follow the exponential recurrences") {
  Tensor p = Tensor::from({2}, {0.0, 0.0}, true);
  std::vector<Tensor> params{p};
  auto state = OptimizerState::for_parameters(params, AdamConfig{});
  double m = 0, v = 0;
  for (int i = 0; i < 2; ++i) {
    p.mutable_grad()[0] = 0.3;
    p.mutable_grad()[1] = -2.0;
    adam_step(params, state);
    m = 0.9 * m + (1.0 - 0.9) * 0.3;
    v = 0.98 * v + (1.0 - 0.98) * 0.3 * 0.3;
    CHECK(state.first_moment[0][0] == doctest::Approx(m).epsilon(1e-14));
    CHECK(state.second_moment[0][0] == doctest::Approx(v).epsilon(1e-14));
  }
  CHECK(state.step == 2);
}

TEST_CASE("adam_step rejects mismatched state") {
  Tensor p = Tensor::zeros({2}, true);
  Tensor q = Tensor::zeros({3}, true);
  std::vector<Tensor> a{p};
  std::vector<Tensor> b{q};
  auto state = OptimizerState::for_parameters(a, AdamConfig{});
  CHECK_THROWS_AS(adam_step(b, state), ContractViolation);
}
