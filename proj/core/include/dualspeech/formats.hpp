#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "dualspeech/dsp.hpp"

namespace dualspeech {

/// "MELF", u32 version (1), u32 n_frames, u32 n_mels, then float32 values,
/// all little-endian, row-major.
void write_features(const std::filesystem::path& path, const MelSpectrogram& mel);
MelSpectrogram read_features(const std::filesystem::path& path);

/// Rounds every value to the nearest float32, as a feature file round trip would.
MelSpectrogram to_float32(MelSpectrogram mel);

/// Binary PGM (P5): width n_frames, height n_mels, row 0 = highest mel bin,
/// min-max normalized to 0..255 (all 0 when the mel is constant).
void render_spectrogram_image(const MelSpectrogram& mel, const std::filesystem::path& path);

/// Append-only "step,term,value" CSV. Values use 17 significant digits so
/// identical runs give byte-identical files.
class LossLog {
 public:
  LossLog() = default;
  /// Opens for append; writes the header only when the file is new or empty.
  explicit LossLog(const std::filesystem::path& path);
  void write(std::uint64_t step, const std::string& term, double value);
  bool is_open() const { return out_.is_open(); }

 private:
  std::ofstream out_;
};

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

}  // namespace dualspeech
