#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "dualspeech/error.hpp"
#include "dualspeech/model.hpp"
#include "dualspeech/transformer.hpp"
#include "gradcheck.hpp"

using namespace dualspeech;
using dualspeech::testing::random_tensor;

namespace {

TransformerConfig small_config() {
  TransformerConfig c;
  c.num_layers = 2;
  c.model_dim = 8;
  c.ffn_dim = 16;
  c.num_heads = 2;
  c.max_seq_len = 32;
  return c;
}

Linear identity(std::size_t d) {
  std::vector<double> w(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) w[i * d + i] = 1.0;
  return {Tensor::from({d, d}, w, true), Tensor::zeros({d}, true)};
}

MultiHeadAttention identity_attention(std::size_t d) {
  return {identity(d), identity(d), identity(d), identity(d), 1};
}

std::vector<double> row(const Tensor& x, std::size_t b, std::size_t t) {
  const std::size_t T = x.dim(1), D = x.dim(2);
  auto data = x.data();
  return {data.begin() + static_cast<std::ptrdiff_t>((b * T + t) * D),
          data.begin() + static_cast<std::ptrdiff_t>((b * T + t + 1) * D)};
}

}  // namespace

TEST_CASE("config validation") {
  TransformerConfig c = small_config();
  CHECK_NOTHROW(c.validate());
  c.num_heads = 3;
  CHECK_THROWS_AS(c.validate(), ContractViolation);
  c = small_config();
  c.num_layers = 0;
  CHECK_THROWS_AS(c.validate(), ContractViolation);
  const TransformerConfig defaults;
  CHECK(defaults.num_layers == 4);
  CHECK(defaults.model_dim == 256);
  CHECK(defaults.ffn_dim == 1024);
}

TEST_CASE("mask matrices") {
  const auto causal = AttentionMask::causal(1, 5).matrix(0, 5, 5);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) CHECK(causal[i][j] == (j <= i));
  const auto pad = AttentionMask::padding({3}).matrix(0, 2, 5);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 5; ++j) CHECK(pad[i][j] == (j < 3));
  const auto both = AttentionMask::combined({2}).matrix(0, 4, 4);
  CHECK(both[3][1]);
  CHECK_FALSE(both[3][2]);
  CHECK_FALSE(both[0][1]);
}

TEST_CASE("saturated query retrieves the matching value") {
  const std::size_t d = 2;
  const double scale = 50.0;
  const Tensor q = Tensor::from({1, 1, d}, {scale, 0.0});
  const Tensor k = Tensor::from({1, 2, d}, {1.0, 0.0, 0.0, 1.0});
  const Tensor v = Tensor::from({1, 2, d}, {3.0, -1.0, 7.0, 5.0});
  const Tensor ctx = multi_head_attention(q, k, v, AttentionMask::padding({2}), identity_attention(d));
  // Oracle: softmax of the two scaled scores.
  const double s0 = scale / std::sqrt(double(d));
  const double w0 = 1.0 / (1.0 + std::exp(-s0)), w1 = 1.0 - w0;
  CHECK(ctx.data()[0] == doctest::Approx(w0 * 3.0 + w1 * 7.0).epsilon(1e-12));
  CHECK(ctx.data()[1] == doctest::Approx(w0 * -1.0 + w1 * 5.0).epsilon(1e-12));
  CHECK(std::abs(ctx.data()[0] - 3.0) < 1e-9);
}

TEST_CASE("zero queries average the unmasked values") {
  std::mt19937_64 rng(3);
  const std::size_t d = 4;
  const Tensor q = Tensor::zeros({1, 2, d});
  const Tensor k = random_tensor({1, 5, d}, rng, -1, 1, false);
  const Tensor v = random_tensor({1, 5, d}, rng, -1, 1, false);
  const Tensor out = multi_head_attention(q, k, v, AttentionMask::padding({3}), identity_attention(d));
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t c = 0; c < d; ++c) {
      const double mean = (v.data()[c] + v.data()[d + c] + v.data()[2 * d + c]) / 3.0;
      CHECK(out.data()[t * d + c] == doctest::Approx(mean).epsilon(1e-12));
    }
}

TEST_CASE("causal position 0 sees only source position 0") {
  std::mt19937_64 rng(4);
  const std::size_t d = 4;
  const MultiHeadAttention mha = MultiHeadAttention::init(d, 2, rng);
  Tensor x = random_tensor({1, 4, d}, rng, -1, 1, false);
  const Tensor before = multi_head_attention(x, x, x, AttentionMask::causal(1, 4), mha);
  Tensor y = Tensor::from({1, 4, d}, {x.data().begin(), x.data().end()});
  for (std::size_t i = d; i < 4 * d; ++i) y.mutable_data()[i] += 1.5;
  const Tensor after = multi_head_attention(y, y, y, AttentionMask::causal(1, 4), mha);
  CHECK(row(before, 0, 0) == row(after, 0, 0));
  CHECK(row(before, 0, 1) != row(after, 0, 1));
}

TEST_CASE("fully masked attention row is rejected") {
  std::mt19937_64 rng(5);
  const Tensor x = random_tensor({1, 3, 4}, rng, -1, 1, false);
  CHECK_THROWS_AS(multi_head_attention(x, x, x, AttentionMask::padding({0}), identity_attention(4)),
                  ContractViolation);
}

TEST_CASE("attention rows are distributions over allowed keys") {
  std::mt19937_64 rng(6);
  const Tensor q = random_tensor({2, 3, 8}, rng, -2, 2, false);
  const Tensor k = random_tensor({2, 5, 8}, rng, -2, 2, false);
  const std::vector<std::size_t> lengths = {5, 2};
  const auto w = ops::attention_weights(q, k, 2, lengths, false);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t h = 0; h < 2; ++h)
      for (std::size_t i = 0; i < 3; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < 5; ++j) {
          const double p = w[((b * 2 + h) * 3 + i) * 5 + j];
          if (j >= lengths[b]) CHECK(p == 0.0);
          s += p;
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
      }
}

TEST_CASE("encoder shape, padding and normalization laws") {
  std::mt19937_64 rng(7);
  const TransformerConfig cfg = small_config();
  const EncoderStack enc(cfg, rng);
  const ForwardContext inference;

  const Tensor one = random_tensor({1, 1, 8}, rng, -1, 1, false);
  const std::vector<std::size_t> len1 = {1};
  const Tensor out1 = enc.encode(one, len1, inference);
  CHECK(out1.shape() == Shape{1, 1, 8});
  for (double v : out1.data()) CHECK(std::isfinite(v));

  Tensor x = random_tensor({2, 6, 8}, rng, -1, 1, false);
  const std::vector<std::size_t> lengths = {4, 6};
  const Tensor base = enc.encode(x, lengths, inference);
  Tensor y = Tensor::from({2, 6, 8}, {x.data().begin(), x.data().end()});
  for (std::size_t c = 0; c < 8; ++c) std::swap(y.mutable_data()[4 * 8 + c], y.mutable_data()[5 * 8 + c]);
  for (std::size_t c = 0; c < 8; ++c) y.mutable_data()[5 * 8 + c] += 10.0;
  const Tensor permuted = enc.encode(y, lengths, inference);
  for (std::size_t t = 0; t < 4; ++t) CHECK(row(base, 0, t) == row(permuted, 0, t));

  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t t = 0; t < 6; ++t) {
      const auto r = row(base, b, t);
      double mean = 0.0, var = 0.0;
      for (double v : r) mean += v;
      mean /= 8.0;
      for (double v : r) var += (v - mean) * (v - mean);
      var /= 8.0;
      CHECK(std::abs(mean) < 1e-6);
      CHECK(std::abs(var - 1.0) < 1e-6);
    }

  const Tensor doubled = enc.encode(ops::scale(x, 2.0), lengths, inference);
  CHECK(row(doubled, 1, 0) != row(base, 1, 0));

  const Tensor too_long = Tensor::zeros({1, 33, 8});
  const std::vector<std::size_t> long_len = {33};
  CHECK_THROWS_AS(enc.encode(too_long, long_len, inference), ContractViolation);
}

TEST_CASE("decoder causality") {
  std::mt19937_64 rng(8);
  const TransformerConfig cfg = small_config();
  const DecoderStack dec(cfg, rng);
  const Tensor memory = random_tensor({1, 5, 8}, rng, -1, 1, false);
  const std::vector<std::size_t> mem_len = {5};
  const std::vector<std::size_t> tgt_len = {6};
  const Tensor prefix = random_tensor({1, 6, 8}, rng, -1, 1, false);
  const Tensor base = dec.forward(prefix, tgt_len, memory, mem_len, ForwardContext{});

  for (std::size_t t = 0; t + 1 < 6; ++t) {
    Tensor changed = Tensor::from({1, 6, 8}, {prefix.data().begin(), prefix.data().end()});
    for (std::size_t c = 0; c < 8; ++c) changed.mutable_data()[(t + 1) * 8 + c] += 3.0;
    const Tensor out = dec.forward(changed, tgt_len, memory, mem_len, ForwardContext{});
    for (std::size_t s = 0; s <= t; ++s) CHECK(row(out, 0, s) == row(base, 0, s));
  }

  // Gradient probe: a weighted sum of output row t has zero gradient wrt later inputs.
  for (std::size_t t = 0; t < 6; ++t) {
    Tensor input = Tensor::from({1, 6, 8}, {prefix.data().begin(), prefix.data().end()}, true);
    const Tensor out = dec.forward(input, tgt_len, memory, mem_len, ForwardContext{});
    std::vector<double> pick(6 * 8, 0.0);
    for (std::size_t c = 0; c < 8; ++c) pick[t * 8 + c] = double(c + 1);
    backward(ops::sum(ops::mul(out, Tensor::from({1, 6, 8}, pick))));
    for (std::size_t i = (t + 1) * 8; i < 6 * 8; ++i) CHECK(input.grad()[i] == 0.0);
    double earlier = 0.0;
    for (std::size_t i = 0; i < (t + 1) * 8; ++i) earlier += std::abs(input.grad()[i]);
    CHECK(earlier > 0.0);
  }

  CHECK_THROWS_AS(decode_step(dec, Tensor::zeros({1, 8}), memory, mem_len), ContractViolation);
}

TEST_CASE("zeroed cross-attention output ignores the encoder") {
  std::mt19937_64 rng(9);
  TransformerConfig cfg = small_config();
  cfg.num_layers = 1;
  DecoderStack dec(cfg, rng);
  for (double& w : dec.layers()[0].cross_attention.output.weight.mutable_data()) w = 0.0;
  const Tensor prefix = random_tensor({1, 3, 8}, rng, -1, 1, false);
  const Tensor m1 = random_tensor({1, 4, 8}, rng, -1, 1, false);
  const Tensor m2 = random_tensor({1, 4, 8}, rng, -5, 5, false);
  const std::vector<std::size_t> ml = {4};
  const Tensor a = decode_step(dec, prefix, m1, ml), b = decode_step(dec, prefix, m2, ml);
  CHECK(std::vector<double>(a.data().begin(), a.data().end()) ==
        std::vector<double>(b.data().begin(), b.data().end()));
}

TEST_CASE("incremental decoding matches full-prefix recomputation") {
  std::mt19937_64 rng(10);
  const TransformerConfig cfg = small_config();
  const DecoderStack dec(cfg, rng);
  const Tensor memory = random_tensor({2, 5, 8}, rng, -1, 1, false);
  const std::vector<std::size_t> mem_len = {5, 3};
  const Tensor inputs = random_tensor({2, 7, 8}, rng, -1, 1, false);
  DecoderCache cache = dec.start(memory, mem_len);
  for (std::size_t t = 0; t < 7; ++t) {
    std::vector<double> step_in, prefix;
    for (std::size_t b = 0; b < 2; ++b) {
      const auto r = row(inputs, b, t);
      step_in.insert(step_in.end(), r.begin(), r.end());
    }
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t s = 0; s <= t; ++s) {
        const auto r = row(inputs, b, s);
        prefix.insert(prefix.end(), r.begin(), r.end());
      }
    const Tensor fast = dec.step(cache, Tensor::from({2, 1, 8}, step_in));
    const Tensor slow = decode_step(dec, Tensor::from({2, t + 1, 8}, prefix), memory, mem_len);
    for (std::size_t i = 0; i < fast.size(); ++i) CHECK(std::abs(fast.data()[i] - slow.data()[i]) < 1e-9);
  }
}

TEST_CASE("dropout only in training") {
  std::mt19937_64 rng(11);
  const EncoderStack enc(small_config(), rng);
  const Tensor x = random_tensor({1, 4, 8}, rng, -1, 1, false);
  const std::vector<std::size_t> len = {4};
  const Tensor a = enc.encode(x, len, ForwardContext{}), b = enc.encode(x, len, ForwardContext{});
  CHECK(std::vector<double>(a.data().begin(), a.data().end()) ==
        std::vector<double>(b.data().begin(), b.data().end()));
  std::mt19937_64 drop(1);
  const Tensor c = enc.encode(x, len, ForwardContext{&drop});
  CHECK(std::vector<double>(a.data().begin(), a.data().end()) !=
        std::vector<double>(c.data().begin(), c.data().end()));
}

TEST_CASE("four independent stacks") {
  ModelConfig cfg;
  cfg.transformer = small_config();
  cfg.prenet_hidden = 8;
  cfg.postnet_hidden = 8;
  cfg.vocab_size = 10;
  Model model(cfg, 1);
  auto snapshot = [&](const std::string& prefix) {
    std::vector<double> out;
    for (auto& p : model.named_parameters())
      if (p.name.rfind(prefix, 0) == 0) out.insert(out.end(), p.tensor.data().begin(), p.tensor.data().end());
    return out;
  };
  const std::vector<std::string> stacks = {"speech_encoder", "speech_decoder", "text_encoder", "text_decoder"};
  for (std::size_t i = 0; i < stacks.size(); ++i) {
    std::vector<std::vector<double>> before;
    for (auto& s : stacks) before.push_back(snapshot(s));
    for (auto& p : model.named_parameters())
      if (p.name.rfind(stacks[i], 0) == 0)
        for (double& v : p.tensor.mutable_data()) v += 0.25;
    for (std::size_t j = 0; j < stacks.size(); ++j) {
      if (j == i)
        CHECK(snapshot(stacks[j]) != before[j]);
      else
        CHECK(snapshot(stacks[j]) == before[j]);
    }
  }
  std::set<const void*> storage;
  for (auto& p : model.named_parameters()) storage.insert(p.tensor.storage_id());
  CHECK(storage.size() == model.named_parameters().size());
}
