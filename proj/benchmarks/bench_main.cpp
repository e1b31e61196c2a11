#include <benchmark/benchmark.h>

#include <random>

#include "dualspeech/dsp.hpp"
#include "dualspeech/eval.hpp"
#include "dualspeech/ops.hpp"
#include "dualspeech/training.hpp"
#include "dualspeech/transformer.hpp"
#include "gradcheck.hpp"

using namespace dualspeech;

namespace {

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  const Tensor a = testing::random_tensor({n, n}, rng, -1, 1, false);
  const Tensor b = testing::random_tensor({n, n}, rng, -1, 1, false);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(ops::matmul(a, b).data().data());
  state.counters["FLOP/s"] = benchmark::Counter(static_cast<double>(state.iterations()) * 2.0 * double(n * n * n),
                                                benchmark::Counter::kIsRate);
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

void BM_MatmulBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(2);
  Tensor a = testing::random_tensor({n, n}, rng);
  Tensor b = testing::random_tensor({n, n}, rng);
  for (auto _ : state) {
    a.zero_grad();
    b.zero_grad();
    backward(ops::sum(ops::matmul(a, b)));
  }
}
BENCHMARK(BM_MatmulBackward)->Arg(64)->Arg(128);

void BM_Attention(benchmark::State& state) {
  const auto len = static_cast<std::size_t>(state.range(0));
  const std::size_t batch = 4, width = 64;
  std::mt19937_64 rng(3);
  const MultiHeadAttention mha = MultiHeadAttention::init(width, 4, rng);
  const Tensor x = testing::random_tensor({batch, len, width}, rng, -1, 1, false);
  const AttentionMask mask = AttentionMask::causal(batch, len);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(multi_head_attention(x, x, x, mask, mha).data().data());
}
BENCHMARK(BM_Attention)->Arg(32)->Arg(128)->Arg(256);

void BM_Stft(benchmark::State& state) {
  const StftConfig cfg;
  const MelFilterbank fb(cfg);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::vector<double> wave(cfg.sample_rate * 2);
  for (double& s : wave) s = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(mel_spectrogram(wave, cfg, fb).values.data());
}
BENCHMARK(BM_Stft);

void BM_GriffinLim(benchmark::State& state) {
  const StftConfig cfg;
  const MelFilterbank fb(cfg);
  std::vector<double> wave(cfg.sample_rate);
  for (std::size_t i = 0; i < wave.size(); ++i) wave[i] = 0.5 * std::sin(0.17 * static_cast<double>(i));
  const MelSpectrogram mel = mel_spectrogram(wave, cfg, fb);
  for (auto _ : state)
    benchmark::DoNotOptimize(griffin_lim(mel, cfg, fb, static_cast<std::size_t>(state.range(0))).raw_peak);
}
BENCHMARK(BM_GriffinLim)->Arg(10)->Arg(60)->Unit(benchmark::kMillisecond);

void BM_EditDistance(benchmark::State& state) {
  const auto len = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(5);
  PhonemeSequence a(len), b(len);
  for (auto& v : a) v = PhonemeId(4 + rng() % 40);
  for (auto& v : b) v = PhonemeId(4 + rng() % 40);
  for (auto _ : state) benchmark::DoNotOptimize(per(a, b).errors());
}
BENCHMARK(BM_EditDistance)->Arg(20)->Arg(100);

void BM_TrainStep(benchmark::State& state) {
  ToySpec spec;
  spec.count = 120;
  spec.frames_per_phoneme = 3;
  spec.min_length = 3;
  spec.max_length = 8;
  const ToyCorpus toy = synthesize_toy_corpus(spec, 1);
  const CorpusPartition part = split_dataset(toy.utterances, SplitConfig{100, 10, 10, 20, false}, 2);
  ModelConfig mc;
  mc.transformer.num_layers = 2;
  mc.transformer.model_dim = 64;
  mc.transformer.ffn_dim = 256;
  mc.prenet_hidden = 64;
  mc.postnet_hidden = 64;
  mc.vocab_size = toy.vocab.size();
  AdamConfig ac;
  ac.d_model = 64;
  TrainState st = init_train_state(mc, ac, 3);
  TrainingConfig tc;
  tc.group_size = 4;
  const bool full = state.range(0) != 0;
  tc.ablation = {full, full, full};
  for (auto _ : state) benchmark::DoNotOptimize(train_step(part, st, tc).total);
}
BENCHMARK(BM_TrainStep)->ArgName("full")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
