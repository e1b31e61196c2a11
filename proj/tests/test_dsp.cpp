#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "doctest.h"
#include "dualspeech/dsp.hpp"
#include "dualspeech/error.hpp"

using namespace dualspeech;

namespace {

std::vector<double> sine(double hz, std::size_t n, double amp = 0.5, std::size_t rate = 16000) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = amp * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / static_cast<double>(rate));
  return out;
}

// Direct O(N^2) DFT power of one windowed frame, independent of FFTW.
std::vector<double> dft_power(const std::vector<double>& frame, std::size_t fft) {
  std::vector<double> out(fft / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k) {
    std::complex<double> acc = 0;
    for (std::size_t n = 0; n < frame.size(); ++n)
      acc += frame[n] * std::polar(1.0, -2.0 * std::numbers::pi * double(k * n) / double(fft));
    out[k] = std::norm(acc);
  }
  return out;
}

}  // namespace

TEST_CASE("frame count formula") {
  const StftConfig cfg;
  CHECK(cfg.frame_count(cfg.frame_length + 3 * cfg.hop_length) == 4);
  CHECK(cfg.frame_count(cfg.frame_length) == 1);
  CHECK(cfg.frame_count(cfg.frame_length + cfg.hop_length - 1) == 1);
  CHECK_THROWS_AS(stft(std::vector<double>(cfg.frame_length - 1), cfg), ContractViolation);
  const StftConfig derived = StftConfig::for_sample_rate(16000);
  CHECK(derived.frame_length == 800);
  CHECK(derived.hop_length == 200);
  CHECK(derived.fft_size == 1024);
}

TEST_CASE("zero wave has zero magnitude and floored mel") {
  const StftConfig cfg;
  const MelFilterbank fb(cfg);
  const std::vector<double> zeros(cfg.frame_length + 5 * cfg.hop_length, 0.0);
  for (double m : magnitudes(stft(zeros, cfg))) CHECK(m == 0.0);
  const MelSpectrogram mel = mel_spectrogram(zeros, cfg, fb);
  CHECK(mel.n_mels == 80);
  CHECK(mel.n_frames() == 6);
  for (double v : mel.values) CHECK(v == std::log(1e-5));
}

TEST_CASE("bin-centred sinusoid concentrates in its main lobe") {
  const StftConfig cfg;
  const std::size_t k0 = 28;
  const double hz = double(k0) * double(cfg.sample_rate) / double(cfg.fft_size);
  const auto wave = sine(hz, cfg.frame_length);
  const ComplexSpectrogram spec = stft(wave, cfg);
  const auto window = hann_window(cfg.frame_length);
  std::vector<double> frame(cfg.frame_length);
  for (std::size_t i = 0; i < frame.size(); ++i) frame[i] = wave[i] * window[i];
  const auto oracle = dft_power(frame, cfg.fft_size);
  const double top = *std::max_element(oracle.begin(), oracle.end());
  double total = 0.0, lobe = 0.0;
  std::size_t peak = 0;
  for (std::size_t k = 0; k < oracle.size(); ++k) {
    CHECK(std::abs(std::norm(spec.at(0, k)) - oracle[k]) <= 1e-9 * top);
    total += oracle[k];
    if (k + 1 >= k0 && k <= k0 + 1) lobe += oracle[k];
    if (oracle[k] > oracle[peak]) peak = k;
  }
  CHECK(peak == k0);
  CHECK(lobe / total > 0.9);
}

TEST_CASE("mel output is 80 wide whatever the fft size") {
  for (std::size_t fft : {1024u, 2048u}) {
    StftConfig cfg;
    cfg.fft_size = fft;
    const MelFilterbank fb(cfg);
    CHECK(mel_spectrogram(sine(300, 4000), cfg, fb).n_mels == 80);
  }
}

TEST_CASE("scaling the wave shifts unfloored log-mel by log c") {
  const StftConfig cfg;
  const MelFilterbank fb(cfg);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 0.1);
  std::vector<double> wave(4000);
  for (double& s : wave) s = g(rng);
  std::vector<double> louder = wave;
  for (double& s : louder) s *= 2.0;
  const MelSpectrogram a = mel_spectrogram(wave, cfg, fb), b = mel_spectrogram(louder, cfg, fb);
  std::size_t checked = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    if (a.values[i] <= std::log(1e-5) + 1e-12) continue;
    CHECK(b.values[i] - a.values[i] == doctest::Approx(std::log(2.0)).epsilon(1e-9));
    ++checked;
  }
  CHECK(checked > 0);
}

TEST_CASE("filterbank shape") {
  const StftConfig cfg;
  const MelFilterbank fb(cfg);
  CHECK(fb.n_mels() == 80);
  CHECK(fb.bins() == 513);
  std::size_t prev_peak = 0;
  for (std::size_t m = 0; m < 80; ++m) {
    std::size_t peak = 0;
    bool positive = false;
    for (std::size_t k = 0; k < fb.bins(); ++k) {
      CHECK(fb.weight(m, k) >= 0.0);
      positive = positive || fb.weight(m, k) > 0.0;
      if (fb.weight(m, k) > fb.weight(m, peak)) peak = k;
    }
    CHECK(positive);
    if (m > 0) CHECK(peak > prev_peak);
    prev_peak = peak;
    // Centres are uniformly spaced on the mel scale.
    const double expected = 700.0 * (std::pow(10.0, (2595.0 * std::log10(1.0 + 8000.0 / 700.0)) * double(m + 1) / 81.0 / 2595.0) - 1.0);
    CHECK(fb.center(m) == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("stft/istft round trip reconstructs the interior") {
  const StftConfig cfg;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> wave(cfg.frame_length + 20 * cfg.hop_length);
  for (double& s : wave) s = u(rng);
  const auto back = istft(stft(wave, cfg), cfg, wave.size());
  double worst = 0.0;
  for (std::size_t i = cfg.frame_length; i + cfg.frame_length < wave.size(); ++i)
    worst = std::max(worst, std::abs(back[i] - wave[i]));
  CHECK(worst < 1e-6);
}

TEST_CASE("griffin-lim on a pure tone") {
  const StftConfig cfg;
  const auto wave = sine(440.0, cfg.frame_length + 30 * cfg.hop_length);
  const ComplexSpectrogram spec = stft(wave, cfg);
  const auto target = magnitudes(spec);
  const GriffinLimResult r = griffin_lim_magnitude(target, spec.n_frames, cfg, 60);
  REQUIRE(r.consistency.size() == 60);
  for (std::size_t i = 1; i < r.consistency.size(); ++i) CHECK(r.consistency[i] <= r.consistency[i - 1] + 1e-10);
  // Re-analyse the output independently of the recorded history.
  const auto again = magnitudes(stft(r.wave.samples, cfg));
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    num += (again[i] - target[i]) * (again[i] - target[i]);
    den += target[i] * target[i];
  }
  CHECK(std::sqrt(num / den) < 1e-2);
}

TEST_CASE("griffin-lim error does not grow with more iterations") {
  const StftConfig cfg;
  const MelFilterbank fb(cfg);
  const MelSpectrogram mel = mel_spectrogram(sine(440.0, 8000), cfg, fb);
  double prev = INFINITY;
  for (std::size_t iters : {1u, 10u, 30u, 60u}) {
    const double err = griffin_lim(mel, cfg, fb, iters).consistency.back();
    CHECK(err <= prev + 1e-10);
    prev = err;
  }
}

TEST_CASE("floored mel reconstructs to near silence") {
  const StftConfig cfg;
  const MelFilterbank fb(cfg);
  const MelSpectrogram mel{80, std::vector<double>(10 * 80, std::log(1e-5))};
  const GriffinLimResult r = griffin_lim(mel, cfg, fb, 5);
  CHECK(r.raw_peak < 1e-3);
  CHECK(r.wave.samples.size() == cfg.frame_length + 9 * cfg.hop_length);
}

TEST_CASE("wav round trip and rejection") {
  const auto dir = std::filesystem::temp_directory_path() / "dualspeech_test_dsp";
  std::filesystem::create_directories(dir);
  Waveform w{sine(1000, 1600, 0.5), 16000};
  write_wav(dir / "a.wav", w);
  const Waveform back = read_wav(dir / "a.wav");
  CHECK(back.sample_rate == 16000);
  REQUIRE(back.samples.size() == w.samples.size());
  for (std::size_t i = 0; i < w.samples.size(); ++i) CHECK(std::abs(back.samples[i] - w.samples[i]) < 1.0 / 16384);

  // Stereo header.
  std::vector<unsigned char> bytes;
  {
    std::ifstream in(dir / "a.wav", std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  bytes[22] = 2;
  {
    std::ofstream out(dir / "stereo.wav", std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  CHECK_THROWS_AS(read_wav(dir / "stereo.wav"), DataError);
  {
    std::ofstream out(dir / "junk.wav", std::ios::binary);
    out << "not audio";
  }
  CHECK_THROWS_AS(read_wav(dir / "junk.wav"), DataError);
  CHECK_THROWS_AS(read_wav(dir / "missing.wav"), DataError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("resampling keeps the tone frequency") {
  const Waveform w{sine(440.0, 22050, 0.5, 22050), 22050};
  const Waveform r = resample(w, 16000);
  CHECK(r.sample_rate == 16000);
  CHECK(r.samples.size() == 16000);
  const StftConfig cfg;
  const auto mags = magnitudes(stft(r.samples, cfg));
  std::size_t peak = 0;
  const std::size_t mid = (mags.size() / cfg.bins()) / 2;
  for (std::size_t k = 0; k < cfg.bins(); ++k)
    if (mags[mid * cfg.bins() + k] > mags[mid * cfg.bins() + peak]) peak = k;
  CHECK(std::abs(double(peak) - 440.0 * 1024 / 16000) <= 1.0);
}
