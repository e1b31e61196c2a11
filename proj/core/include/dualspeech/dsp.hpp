#pragma once

#include <complex>
#include <cstddef>
#include <filesystem>
#include <vector>

namespace dualspeech {

struct StftConfig {
  std::size_t sample_rate = 16000;
  std::size_t frame_length = 800;  // 50 ms
  std::size_t hop_length = 200;    // 12.5 ms
  std::size_t fft_size = 1024;

  /// 50 ms frames, 12.5 ms hop, fft size the next power of two.
  static StftConfig for_sample_rate(std::size_t sample_rate);
  std::size_t bins() const { return fft_size / 2 + 1; }
  std::size_t frame_count(std::size_t samples) const;
  void validate() const;
};

struct Waveform {
  std::vector<double> samples;
  std::size_t sample_rate = 16000;
};

/// [n_frames, bins] complex spectrum, row-major.
struct ComplexSpectrogram {
  std::size_t n_frames = 0;
  std::size_t bins = 0;
  std::vector<std::complex<double>> values;
  std::complex<double>& at(std::size_t t, std::size_t k) { return values[t * bins + k]; }
  const std::complex<double>& at(std::size_t t, std::size_t k) const { return values[t * bins + k]; }
};

/// Log-compressed mel energies [n_frames, n_mels], row-major.
struct MelSpectrogram {
  std::size_t n_mels = 80;
  std::vector<double> values;

  std::size_t n_frames() const { return n_mels == 0 ? 0 : values.size() / n_mels; }
  double at(std::size_t t, std::size_t m) const { return values[t * n_mels + m]; }
  bool operator==(const MelSpectrogram&) const = default;
};

/// Triangular filters on the HTK mel scale, peak weight 1.
class MelFilterbank {
 public:
  MelFilterbank(const StftConfig& cfg, std::size_t n_mels = 80, double fmin = 0.0, double fmax = 8000.0);

  std::size_t n_mels() const { return n_mels_; }
  std::size_t bins() const { return bins_; }
  double weight(std::size_t m, std::size_t k) const { return weights_[m * bins_ + k]; }
  const std::vector<double>& weights() const { return weights_; }
  /// Center frequency (Hz) of filter m.
  double center(std::size_t m) const { return centers_[m]; }

  /// [n_frames, bins] magnitudes -> [n_frames, n_mels] linear energies.
  std::vector<double> apply(const std::vector<double>& magnitudes, std::size_t n_frames) const;
  /// Pseudo-inverse of the filterbank applied per frame, negatives clipped to 0.
  std::vector<double> invert(const std::vector<double>& mel_energies, std::size_t n_frames) const;

 private:
  std::size_t n_mels_, bins_;
  std::vector<double> weights_;
  std::vector<double> centers_;
  std::vector<double> pinv_;  // [bins, n_mels]
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Periodic Hann window of the given length.
std::vector<double> hann_window(std::size_t length);

inline constexpr double kLogFloor = 1e-5;

ComplexSpectrogram stft(const std::vector<double>& wave, const StftConfig& cfg);
/// Weighted overlap-add inverse (normalized by the summed squared window).
std::vector<double> istft(const ComplexSpectrogram& spec, const StftConfig& cfg, std::size_t length);
/// |STFT| as [n_frames, bins].
std::vector<double> magnitudes(const ComplexSpectrogram& spec);

MelSpectrogram mel_spectrogram(const std::vector<double>& wave, const StftConfig& cfg,
                               const MelFilterbank& fb);

struct GriffinLimResult {
  Waveform wave;
  // Peak before normalization.
  double raw_peak = 0.0;
  // Relative L2 distance between the target magnitude and that of the
  // reconstruction, after each iteration.
  std::vector<double> consistency;
};

/// Mel -> linear magnitude via the clipped pseudo-inverse, then Griffin-Lim
/// phase projection. Output is scaled down to peak 1 only when it exceeds 1.
GriffinLimResult griffin_lim(const MelSpectrogram& mel, const StftConfig& cfg, const MelFilterbank& fb,
                             std::size_t iterations = 60);
/// Griffin-Lim from a linear magnitude spectrogram [n_frames, bins].
GriffinLimResult griffin_lim_magnitude(const std::vector<double>& magnitude, std::size_t n_frames,
                                       const StftConfig& cfg, std::size_t iterations = 60);

/// PCM 16-bit little-endian mono WAV.
Waveform read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const Waveform& wave);
/// Windowed-sinc resampling.
Waveform resample(const Waveform& wave, std::size_t target_rate);

}  // namespace dualspeech
