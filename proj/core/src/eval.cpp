#include "dualspeech/eval.hpp"

#include <algorithm>

#include "dualspeech/error.hpp"

namespace dualspeech {

double PerReport::per() const {
  DUALSPEECH_EXPECT(reference_length > 0, "per: empty reference");
  return static_cast<double>(errors()) / static_cast<double>(reference_length);
}

PerReport& PerReport::operator+=(const PerReport& other) {
  substitutions += other.substitutions;
  deletions += other.deletions;
  insertions += other.insertions;
  reference_length += other.reference_length;
  return *this;
}

Alignment align(const PhonemeSequence& ref, const PhonemeSequence& hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::size_t> d((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return d[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j)
      at(i, j) = std::min({at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0u : 1u), at(i - 1, j) + 1,
                           at(i, j - 1) + 1});

  Alignment out;
  out.report.reference_length = n;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && at(i, j) == at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0u : 1u)) {
      const bool same = ref[i - 1] == hyp[j - 1];
      out.steps.push_back({same ? EditOp::Match : EditOp::Substitute, i - 1});
      if (!same) ++out.report.substitutions;
      --i;
      --j;
    } else if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      out.steps.push_back({EditOp::Delete, i - 1});
      ++out.report.deletions;
      --i;
    } else {
      out.steps.push_back({EditOp::Insert, i > 0 ? i - 1 : 0});
      ++out.report.insertions;
      --j;
    }
  }
  std::reverse(out.steps.begin(), out.steps.end());
  return out;
}

PerReport per(const PhonemeSequence& ref, const PhonemeSequence& hyp) {
  DUALSPEECH_EXPECT(!ref.empty(), "per: empty reference");
  return align(ref, hyp).report;
}

HalfPer half_per(const PhonemeSequence& ref, const PhonemeSequence& hyp) {
  DUALSPEECH_EXPECT(!ref.empty(), "per: empty reference");
  const std::size_t split = (ref.size() + 1) / 2;
  HalfPer out;
  out.left.reference_length = split;
  out.right.reference_length = ref.size() - split;
  for (const auto& step : align(ref, hyp).steps) {
    PerReport& half = step.ref < split ? out.left : out.right;
    switch (step.op) {
      case EditOp::Match: break;
      case EditOp::Substitute: ++half.substitutions; break;
      case EditOp::Delete: ++half.deletions; break;
      case EditOp::Insert: ++half.insertions; break;
    }
  }
  return out;
}

PerSummary right_half_per(const std::vector<PhonemeSequence>& refs, const std::vector<PhonemeSequence>& hyps) {
  DUALSPEECH_EXPECT(refs.size() == hyps.size(), "right_half_per: reference/hypothesis count mismatch");
  PerSummary out;
  for (std::size_t k = 0; k < refs.size(); ++k) {
    const PhonemeSequence ref = strip_specials(refs[k]), hyp = strip_specials(hyps[k]);
    const HalfPer h = half_per(ref, hyp);
    out.left += h.left;
    out.right += h.right;
    out.overall += h.left;
    out.overall += h.right;
  }
  return out;
}

PhonemeSequence strip_specials(const PhonemeSequence& seq) {
  PhonemeSequence out;
  for (PhonemeId id : seq)
    if (id != PhonemeVocab::kEos && id != PhonemeVocab::kPad) out.push_back(id);
  return out;
}

MelDistortion mel_distortion(const MelSpectrogram& reference, const MelSpectrogram& predicted) {
  DUALSPEECH_EXPECT(reference.n_mels == predicted.n_mels && reference.values.size() == predicted.values.size(),
                    "mel_distortion: spectrogram shapes differ");
  const std::size_t frames = reference.n_frames();
  DUALSPEECH_EXPECT(frames >= 1, "mel_distortion: empty spectrogram");
  MelDistortion out;
  const std::size_t split = (frames + 1) / 2;
  double left = 0.0, right = 0.0;
  for (std::size_t t = 0; t < frames; ++t) {
    double s = 0.0;
    for (std::size_t m = 0; m < reference.n_mels; ++m) {
      const double e = reference.at(t, m) - predicted.at(t, m);
      s += e * e;
    }
    s /= static_cast<double>(reference.n_mels);
    out.per_frame.push_back(s);
    (t < split ? left : right) += s;
  }
  out.overall = (left + right) / static_cast<double>(frames);
  out.left = left / static_cast<double>(split);
  out.right = frames > split ? right / static_cast<double>(frames - split) : 0.0;
  return out;
}

}  // namespace dualspeech
