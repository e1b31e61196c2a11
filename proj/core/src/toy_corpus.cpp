#include <cmath>
#include <iomanip>
#include <sstream>

#include "dualspeech/corpus.hpp"
#include "dualspeech/error.hpp"
#include "dualspeech/formats.hpp"

namespace dualspeech {

void ToySpec::validate() const {
  DUALSPEECH_EXPECT(inventory >= 2, "toy spec: need at least two phonemes");
  DUALSPEECH_EXPECT(frames_per_phoneme >= 1 && n_mels >= 1, "toy spec: sizes must be positive");
  DUALSPEECH_EXPECT(noise >= 0.0 && width > 0.0, "toy spec: noise must be >= 0 and width > 0");
  DUALSPEECH_EXPECT(min_length >= 1 && min_length <= max_length, "toy spec: bad length range");
  DUALSPEECH_EXPECT(successors >= 1 && successors <= inventory, "toy spec: bad successor count");
}

std::vector<double> toy_pattern(const ToySpec& spec, std::size_t k) {
  DUALSPEECH_EXPECT(k < spec.inventory, "toy_pattern: symbol out of range");
  const double center = (static_cast<double>(k) + 0.5) * static_cast<double>(spec.n_mels) /
                        static_cast<double>(spec.inventory);
  std::vector<double> out(spec.n_mels);
  for (std::size_t m = 0; m < spec.n_mels; ++m) {
    const double z = (static_cast<double>(m) - center) / spec.width;
    out[m] = spec.amplitude * std::exp(-0.5 * z * z);
  }
  return out;
}

double min_pattern_distance(const ToySpec& spec) {
  double best = INFINITY;
  for (std::size_t a = 0; a < spec.inventory; ++a) {
    const auto pa = toy_pattern(spec, a);
    for (std::size_t b = a + 1; b < spec.inventory; ++b) {
      const auto pb = toy_pattern(spec, b);
      double s = 0.0;
      for (std::size_t m = 0; m < spec.n_mels; ++m) s += (pa[m] - pb[m]) * (pa[m] - pb[m]);
      best = std::min(best, std::sqrt(s));
    }
  }
  return best;
}

MelSpectrogram render_toy_mel(const ToySpec& spec, const PhonemeSequence& seq) {
  MelSpectrogram mel{spec.n_mels, {}};
  for (PhonemeId id : seq) {
    if (id < static_cast<PhonemeId>(PhonemeVocab::kNumSpecials)) continue;
    const auto pattern = toy_pattern(spec, static_cast<std::size_t>(id) - PhonemeVocab::kNumSpecials);
    for (std::size_t f = 0; f < spec.frames_per_phoneme; ++f)
      mel.values.insert(mel.values.end(), pattern.begin(), pattern.end());
  }
  return mel;
}

ToyCorpus synthesize_toy_corpus(const ToySpec& spec, std::uint64_t seed) {
  spec.validate();
  const double required = 4.0 * spec.noise * std::sqrt(static_cast<double>(spec.n_mels));
  if (!(min_pattern_distance(spec) > required))
    throw ContractViolation("toy spec: phoneme patterns are not distinguishable at this noise level");

  ToyCorpus corpus;
  corpus.vocab = PhonemeVocab::toy(spec.inventory);
  for (std::size_t k = 0; k < spec.inventory; ++k) corpus.patterns.push_back(toy_pattern(spec, k));

  std::mt19937_64 rng(seed);
  // Sparse bigram grammar: each symbol mostly continues to a few fixed
  // successors, occasionally to any symbol.
  std::vector<std::vector<std::size_t>> next(spec.inventory);
  for (auto& succ : next) {
    std::vector<std::size_t> all(spec.inventory);
    for (std::size_t i = 0; i < spec.inventory; ++i) all[i] = i;
    for (std::size_t i = 0; i < spec.successors; ++i) {
      std::swap(all[i], all[i + rng() % (spec.inventory - i)]);
      succ.push_back(all[i]);
    }
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::size_t width = std::to_string(spec.count).size();
  for (std::size_t n = 0; n < spec.count; ++n) {
    const std::size_t len = spec.min_length + rng() % (spec.max_length - spec.min_length + 1);
    PhonemeSequence seq;
    std::size_t cur = rng() % spec.inventory;
    for (std::size_t i = 0; i < len; ++i) {
      if (i > 0) cur = unit(rng) < 0.9 ? next[cur][rng() % spec.successors] : rng() % spec.inventory;
      seq.push_back(static_cast<PhonemeId>(cur + PhonemeVocab::kNumSpecials));
    }
    seq.push_back(PhonemeVocab::kEos);
    MelSpectrogram mel = render_toy_mel(spec, seq);
    if (spec.noise > 0.0)
      for (double& v : mel.values) v += spec.noise * gauss(rng);
    std::ostringstream id;
    id << "toy" << std::setw(static_cast<int>(width)) << std::setfill('0') << n;
    corpus.utterances.push_back(Utterance{id.str(), to_float32(std::move(mel)), std::move(seq)});
  }
  return corpus;
}

}  // namespace dualspeech
