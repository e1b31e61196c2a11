#include "dualspeech/dsp.hpp"

#include <fftw3.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>

#include "dualspeech/error.hpp"

namespace dualspeech {

namespace {

// Planner calls are not thread-safe in FFTW; execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    in_ = fftw_alloc_real(n);
    out_ = fftw_alloc_complex(n / 2 + 1);
    std::lock_guard lock(planner_mutex());
    forward_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
    inverse_ = fftw_plan_dft_c2r_1d(static_cast<int>(n), out_, in_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(inverse_);
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* real() { return in_; }
  std::complex<double>* spectrum() { return reinterpret_cast<std::complex<double>*>(out_); }
  void forward() { fftw_execute(forward_); }
  // Unnormalized: the result is scaled by n.
  void inverse() { fftw_execute(inverse_); }

 private:
  std::size_t n_;
  double* in_;
  fftw_complex* out_;
  fftw_plan forward_, inverse_;
};

double l2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

StftConfig StftConfig::for_sample_rate(std::size_t sample_rate) {
  StftConfig c;
  c.sample_rate = sample_rate;
  c.frame_length = static_cast<std::size_t>(std::lround(0.05 * static_cast<double>(sample_rate)));
  c.hop_length = static_cast<std::size_t>(std::lround(0.0125 * static_cast<double>(sample_rate)));
  c.fft_size = 1;
  while (c.fft_size < c.frame_length) c.fft_size *= 2;
  return c;
}

void StftConfig::validate() const {
  DUALSPEECH_EXPECT(sample_rate > 0 && frame_length > 0 && hop_length > 0,
                    "stft: sizes must be positive");
  DUALSPEECH_EXPECT(hop_length <= frame_length, "stft: hop must not exceed the frame");
  DUALSPEECH_EXPECT(fft_size >= frame_length, "stft: fft_size must cover the frame");
}

std::size_t StftConfig::frame_count(std::size_t samples) const {
  DUALSPEECH_EXPECT(samples >= frame_length, "stft: wave shorter than one frame");
  return 1 + (samples - frame_length) / hop_length;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> hann_window(std::size_t length) {
  std::vector<double> w(length);
  for (std::size_t i = 0; i < length; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                static_cast<double>(length));
  return w;
}

MelFilterbank::MelFilterbank(const StftConfig& cfg, std::size_t n_mels, double fmin, double fmax)
    : n_mels_(n_mels), bins_(cfg.bins()) {
  cfg.validate();
  DUALSPEECH_EXPECT(n_mels > 0, "mel filterbank: n_mels must be positive");
  DUALSPEECH_EXPECT(fmin >= 0.0 && fmax > fmin && fmax <= cfg.sample_rate / 2.0,
                    "mel filterbank: need 0 <= fmin < fmax <= nyquist");
  const double lo = hz_to_mel(fmin), hi = hz_to_mel(fmax);
  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n_mels + 1));
  const double bin_hz = static_cast<double>(cfg.sample_rate) / static_cast<double>(cfg.fft_size);
  weights_.assign(n_mels * bins_, 0.0);
  centers_.resize(n_mels);
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double left = edges[m], mid = edges[m + 1], right = edges[m + 2];
    centers_[m] = mid;
    for (std::size_t k = 0; k < bins_; ++k) {
      const double f = static_cast<double>(k) * bin_hz;
      double w = 0.0;
      if (f > left && f <= mid) w = (f - left) / (mid - left);
      else if (f > mid && f < right) w = (right - f) / (right - mid);
      weights_[m * bins_ + k] = w;
    }
    // Filters narrower than a bin would be empty; keep the nearest bin.
    const auto nearest = static_cast<std::size_t>(std::lround(mid / bin_hz));
    if (nearest < bins_ && weights_[m * bins_ + nearest] == 0.0) {
      bool any = false;
      for (std::size_t k = 0; k < bins_; ++k) any = any || weights_[m * bins_ + k] > 0.0;
      if (!any) weights_[m * bins_ + nearest] = 1.0;
    }
  }
  using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const Matrix> fb(weights_.data(), static_cast<Eigen::Index>(n_mels),
                              static_cast<Eigen::Index>(bins_));
  const Matrix pinv = fb.completeOrthogonalDecomposition().pseudoInverse();
  pinv_.assign(pinv.data(), pinv.data() + pinv.size());
}

std::vector<double> MelFilterbank::apply(const std::vector<double>& magnitudes,
                                         std::size_t n_frames) const {
  DUALSPEECH_EXPECT(magnitudes.size() == n_frames * bins_, "mel filterbank: magnitude shape");
  std::vector<double> out(n_frames * n_mels_, 0.0);
  for (std::size_t t = 0; t < n_frames; ++t)
    for (std::size_t m = 0; m < n_mels_; ++m) {
      double s = 0.0;
      for (std::size_t k = 0; k < bins_; ++k) s += weights_[m * bins_ + k] * magnitudes[t * bins_ + k];
      out[t * n_mels_ + m] = s;
    }
  return out;
}

std::vector<double> MelFilterbank::invert(const std::vector<double>& mel_energies,
                                          std::size_t n_frames) const {
  DUALSPEECH_EXPECT(mel_energies.size() == n_frames * n_mels_, "mel filterbank: mel shape");
  std::vector<double> out(n_frames * bins_, 0.0);
  for (std::size_t t = 0; t < n_frames; ++t)
    for (std::size_t k = 0; k < bins_; ++k) {
      double s = 0.0;
      for (std::size_t m = 0; m < n_mels_; ++m) s += pinv_[k * n_mels_ + m] * mel_energies[t * n_mels_ + m];
      out[t * bins_ + k] = std::max(s, 0.0);
    }
  return out;
}

ComplexSpectrogram stft(const std::vector<double>& wave, const StftConfig& cfg) {
  cfg.validate();
  const std::size_t frames = cfg.frame_count(wave.size());
  const auto window = hann_window(cfg.frame_length);
  ComplexSpectrogram spec{frames, cfg.bins(), std::vector<std::complex<double>>(frames * cfg.bins())};
  RealFft fft(cfg.fft_size);
  for (std::size_t t = 0; t < frames; ++t) {
    double* buf = fft.real();
    std::fill(buf, buf + cfg.fft_size, 0.0);
    for (std::size_t i = 0; i < cfg.frame_length; ++i) buf[i] = wave[t * cfg.hop_length + i] * window[i];
    fft.forward();
    std::copy_n(fft.spectrum(), spec.bins, spec.values.begin() + static_cast<std::ptrdiff_t>(t * spec.bins));
  }
  return spec;
}

std::vector<double> istft(const ComplexSpectrogram& spec, const StftConfig& cfg, std::size_t length) {
  cfg.validate();
  DUALSPEECH_EXPECT(spec.bins == cfg.bins(), "istft: bin count does not match config");
  DUALSPEECH_EXPECT(length >= cfg.frame_length + (spec.n_frames - 1) * cfg.hop_length,
                    "istft: output shorter than the frames span");
  const auto window = hann_window(cfg.frame_length);
  std::vector<double> out(length, 0.0), norm(length, 0.0);
  RealFft fft(cfg.fft_size);
  const double scale = 1.0 / static_cast<double>(cfg.fft_size);
  for (std::size_t t = 0; t < spec.n_frames; ++t) {
    std::copy_n(spec.values.begin() + static_cast<std::ptrdiff_t>(t * spec.bins), spec.bins, fft.spectrum());
    fft.inverse();
    const double* buf = fft.real();
    for (std::size_t i = 0; i < cfg.frame_length; ++i) {
      out[t * cfg.hop_length + i] += buf[i] * scale * window[i];
      norm[t * cfg.hop_length + i] += window[i] * window[i];
    }
  }
  for (std::size_t i = 0; i < length; ++i)
    if (norm[i] > 1e-8) out[i] /= norm[i];
  return out;
}

std::vector<double> magnitudes(const ComplexSpectrogram& spec) {
  std::vector<double> out(spec.values.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::abs(spec.values[i]);
  return out;
}

MelSpectrogram mel_spectrogram(const std::vector<double>& wave, const StftConfig& cfg,
                               const MelFilterbank& fb) {
  const ComplexSpectrogram spec = stft(wave, cfg);
  DUALSPEECH_EXPECT(fb.bins() == spec.bins, "mel_spectrogram: filterbank built for another fft size");
  std::vector<double> energies = fb.apply(magnitudes(spec), spec.n_frames);
  for (double& e : energies) e = std::log(std::max(e, kLogFloor));
  return MelSpectrogram{fb.n_mels(), std::move(energies)};
}

GriffinLimResult griffin_lim_magnitude(const std::vector<double>& magnitude, std::size_t n_frames,
                                       const StftConfig& cfg, std::size_t iterations) {
  cfg.validate();
  DUALSPEECH_EXPECT(iterations >= 1, "griffin_lim: iterations must be at least 1");
  DUALSPEECH_EXPECT(n_frames >= 1 && magnitude.size() == n_frames * cfg.bins(),
                    "griffin_lim: magnitude shape does not match config");
  const std::size_t length = cfg.frame_length + (n_frames - 1) * cfg.hop_length;
  const double target_norm = std::max(l2(magnitude), 1e-300);

  // Zero initial phase, then the accelerated projection with momentum
  // kMomentum on the projected spectrum.
  static constexpr double kMomentum = 0.9;
  ComplexSpectrogram estimate{n_frames, cfg.bins(), std::vector<std::complex<double>>(magnitude.size())};
  for (std::size_t i = 0; i < magnitude.size(); ++i) estimate.values[i] = magnitude[i];
  ComplexSpectrogram projected = estimate;

  GriffinLimResult result;
  std::vector<double> wave;
  for (std::size_t it = 0; it < iterations; ++it) {
    wave = istft(estimate, cfg, length);
    const ComplexSpectrogram rebuilt = stft(wave, cfg);
    double dist = 0.0;
    for (std::size_t i = 0; i < magnitude.size(); ++i) {
      const double mag = std::abs(rebuilt.values[i]);
      dist += (mag - magnitude[i]) * (mag - magnitude[i]);
      const std::complex<double> next = mag > 0.0 ? rebuilt.values[i] * (magnitude[i] / mag)
                                                   : std::complex<double>(magnitude[i], 0.0);
      estimate.values[i] = next + kMomentum * (next - projected.values[i]);
      projected.values[i] = next;
    }
    result.consistency.push_back(std::sqrt(dist) / target_norm);
  }
  estimate = std::move(projected);
  wave = istft(estimate, cfg, length);
  double peak = 0.0;
  for (double s : wave) peak = std::max(peak, std::abs(s));
  result.raw_peak = peak;
  if (peak > 1.0)
    for (double& s : wave) s /= peak;
  result.wave = Waveform{std::move(wave), cfg.sample_rate};
  return result;
}

GriffinLimResult griffin_lim(const MelSpectrogram& mel, const StftConfig& cfg, const MelFilterbank& fb,
                             std::size_t iterations) {
  DUALSPEECH_EXPECT(mel.n_mels == fb.n_mels(), "griffin_lim: mel width does not match filterbank");
  DUALSPEECH_EXPECT(mel.n_frames() >= 1, "griffin_lim: empty spectrogram");
  std::vector<double> energies(mel.values.size());
  for (std::size_t i = 0; i < energies.size(); ++i) {
    // The floor encodes silence.
    const double e = std::exp(mel.values[i]);
    energies[i] = e <= kLogFloor * (1.0 + 1e-9) ? 0.0 : e;
  }
  return griffin_lim_magnitude(fb.invert(energies, mel.n_frames()), mel.n_frames(), cfg, iterations);
}

}  // namespace dualspeech
