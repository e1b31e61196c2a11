#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>

#include "dualspeech/dsp.hpp"
#include "dualspeech/error.hpp"

namespace dualspeech {

namespace {

std::uint32_t u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}
std::uint16_t u16le(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}

void put_u32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 24)};
  out.write(b, 4);
}
void put_u16(std::ostream& out, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v), static_cast<char>(v >> 8)};
  out.write(b, 2);
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open wav file " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string name = path.string();
  if (bytes.size() < 12 || std::string(bytes.begin(), bytes.begin() + 4) != "RIFF" ||
      std::string(bytes.begin() + 8, bytes.begin() + 12) != "WAVE")
    throw DataError(name + ": not a RIFF/WAVE file");

  bool have_format = false;
  std::uint16_t channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::string id(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                         bytes.begin() + static_cast<std::ptrdiff_t>(pos + 4));
    const std::uint32_t size = u32le(&bytes[pos + 4]);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) throw DataError(name + ": truncated chunk '" + id + "'");
    if (id == "fmt ") {
      if (size < 16) throw DataError(name + ": short fmt chunk");
      const std::uint16_t format = u16le(&bytes[body]);
      channels = u16le(&bytes[body + 2]);
      rate = u32le(&bytes[body + 4]);
      bits = u16le(&bytes[body + 14]);
      if (format != 1 || bits != 16 || channels != 1)
        throw DataError(name + ": only 16-bit PCM mono is supported (format " + std::to_string(format) +
                        ", " + std::to_string(bits) + " bits, " + std::to_string(channels) +
                        " channels)");
      have_format = true;
    } else if (id == "data") {
      if (!have_format) throw DataError(name + ": data chunk before fmt chunk");
      Waveform wave;
      wave.sample_rate = rate;
      wave.samples.resize(size / 2);
      for (std::size_t i = 0; i < wave.samples.size(); ++i) {
        const auto v = static_cast<std::int16_t>(u16le(&bytes[body + 2 * i]));
        wave.samples[i] = static_cast<double>(v) / 32768.0;
      }
      return wave;
    }
    pos = body + size + (size & 1u);
  }
  throw DataError(name + ": no data chunk");
}

void write_wav(const std::filesystem::path& path, const Waveform& wave) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write wav file " + path.string());
  const auto data_bytes = static_cast<std::uint32_t>(wave.samples.size() * 2);
  out.write("RIFF", 4);
  put_u32(out, 36 + data_bytes);
  out.write("WAVEfmt ", 8);
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(wave.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(wave.sample_rate * 2));
  put_u16(out, 2);
  put_u16(out, 16);
  out.write("data", 4);
  put_u32(out, data_bytes);
  for (double s : wave.samples) {
    const double clipped = std::clamp(s, -1.0, 1.0);
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(clipped * 32767.0))));
  }
  if (!out) throw DataError("failed writing " + path.string());
}

Waveform resample(const Waveform& wave, std::size_t target_rate) {
  DUALSPEECH_EXPECT(wave.sample_rate > 0 && target_rate > 0, "resample: rates must be positive");
  if (wave.sample_rate == target_rate) return wave;
  const double ratio = static_cast<double>(target_rate) / static_cast<double>(wave.sample_rate);
  const double cutoff = std::min(1.0, ratio);
  constexpr int kHalfTaps = 32;
  const auto n_out = static_cast<std::size_t>(std::floor(static_cast<double>(wave.samples.size()) * ratio));
  Waveform out;
  out.sample_rate = target_rate;
  out.samples.resize(n_out);
  const auto n_in = static_cast<long>(wave.samples.size());
  for (std::size_t i = 0; i < n_out; ++i) {
    const double center = static_cast<double>(i) / ratio;
    const auto first = static_cast<long>(std::floor(center)) - kHalfTaps / cutoff;
    const auto last = static_cast<long>(std::floor(center)) + kHalfTaps / cutoff;
    double acc = 0.0;
    for (long j = std::max(0L, static_cast<long>(first)); j <= std::min(n_in - 1, static_cast<long>(last)); ++j) {
      const double x = (static_cast<double>(j) - center) * cutoff;
      const double sinc = x == 0.0 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
      const double span = kHalfTaps;
      const double window = std::abs(x) >= span ? 0.0 : 0.5 + 0.5 * std::cos(std::numbers::pi * x / span);
      acc += wave.samples[static_cast<std::size_t>(j)] * sinc * window * cutoff;
    }
    out.samples[i] = acc;
  }
  return out;
}

}  // namespace dualspeech
