#pragma once

#include <cstddef>
#include <vector>

#include "dualspeech/dsp.hpp"
#include "dualspeech/formats.hpp"
#include "dualspeech/text.hpp"

namespace dualspeech {

enum class EditOp { Match, Substitute, Delete, Insert };

struct PerReport {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t reference_length = 0;

  std::size_t errors() const { return substitutions + deletions + insertions; }
  double per() const;
  PerReport& operator+=(const PerReport& other);
};

struct Alignment {
  struct Step {
    EditOp op;
    std::size_t ref;  // reference position the step is charged to
  };
  std::vector<Step> steps;
  PerReport report;
};

/// Unit-cost minimum edit alignment. On ties the backtrace prefers the
/// diagonal, then deletion, then insertion. Insertions are charged to the
/// preceding reference position (position 0 when leading).
Alignment align(const PhonemeSequence& ref, const PhonemeSequence& hyp);

/// PER of hyp against a non-empty ref.
PerReport per(const PhonemeSequence& ref, const PhonemeSequence& hyp);

/// Errors split by reference half: positions [0, ceil(N/2)) and the rest.
struct HalfPer {
  PerReport left, right;
};
HalfPer half_per(const PhonemeSequence& ref, const PhonemeSequence& hyp);

/// Corpus totals: overall PER plus left/right-half PER, each as summed edits
/// over summed reference lengths.
struct PerSummary {
  PerReport overall, left, right;
};
PerSummary right_half_per(const std::vector<PhonemeSequence>& refs, const std::vector<PhonemeSequence>& hyps);

/// Content symbols only: PAD and EOS removed.
PhonemeSequence strip_specials(const PhonemeSequence& seq);

struct MelDistortion {
  std::vector<double> per_frame;
  double overall = 0.0;
  double left = 0.0;   // frames [0, ceil(T/2))
  double right = 0.0;  // the rest (0 when T == 1)
};
/// Frame-wise MSE between equally long spectrograms.
MelDistortion mel_distortion(const MelSpectrogram& reference, const MelSpectrogram& predicted);

}  // namespace dualspeech
