#include "dualspeech/formats.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <vector>

#include "dualspeech/error.hpp"

namespace dualspeech {

namespace {

static_assert(std::endian::native == std::endian::little, "file formats assume a little-endian host");

constexpr char kMagic[4] = {'M', 'E', 'L', 'F'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }

std::uint32_t get_u32(std::istream& in, const std::string& name) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), 4)) throw DataError(name + ": truncated header");
  return v;
}

}  // namespace

void write_features(const std::filesystem::path& path, const MelSpectrogram& mel) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write feature file " + path.string());
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(mel.n_frames()));
  put_u32(out, static_cast<std::uint32_t>(mel.n_mels));
  std::vector<float> values(mel.values.begin(), mel.values.end());
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(float)));
  if (!out) throw DataError("failed writing " + path.string());
}

MelSpectrogram read_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  const std::string name = path.string();
  if (!in) throw DataError("cannot open feature file " + name);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError(name + ": not a MELF feature file");
  const std::uint32_t version = get_u32(in, name);
  if (version != kVersion)
    throw DataError(name + ": unsupported feature file version " + std::to_string(version));
  const std::uint32_t frames = get_u32(in, name);
  const std::uint32_t mels = get_u32(in, name);
  if (mels == 0) throw DataError(name + ": zero mel channels");
  std::vector<float> values(static_cast<std::size_t>(frames) * mels);
  if (!in.read(reinterpret_cast<char*>(values.data()),
               static_cast<std::streamsize>(values.size() * sizeof(float))))
    throw DataError(name + ": truncated feature data");
  MelSpectrogram mel{mels, std::vector<double>(values.begin(), values.end())};
  for (double v : mel.values)
    if (!std::isfinite(v)) throw DataError(name + ": non-finite feature value");
  return mel;
}

MelSpectrogram to_float32(MelSpectrogram mel) {
  for (double& v : mel.values) v = static_cast<double>(static_cast<float>(v));
  return mel;
}

void render_spectrogram_image(const MelSpectrogram& mel, const std::filesystem::path& path) {
  DUALSPEECH_EXPECT(mel.n_frames() >= 1, "render_spectrogram_image: empty spectrogram");
  double lo = mel.values.front(), hi = mel.values.front();
  for (double v : mel.values) {
    DUALSPEECH_EXPECT(std::isfinite(v), "render_spectrogram_image: non-finite mel value");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const std::size_t width = mel.n_frames(), height = mel.n_mels;
  std::vector<unsigned char> pixels(width * height, 0);
  if (hi > lo)
    for (std::size_t row = 0; row < height; ++row)
      for (std::size_t t = 0; t < width; ++t) {
        const double v = (mel.at(t, height - 1 - row) - lo) / (hi - lo);
        pixels[row * width + t] = static_cast<unsigned char>(std::lround(v * 255.0));
      }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write image " + path.string());
  out << "P5\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

std::string format_double(double value) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return {buf, end};
}

LossLog::LossLog(const std::filesystem::path& path) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  out_.open(path, std::ios::app);
  if (!out_) throw DataError("cannot open loss log " + path.string());
  if (fresh) out_ << "step,term,value\n";
}

void LossLog::write(std::uint64_t step, const std::string& term, double value) {
  out_ << step << ',' << term << ',' << format_double(value) << '\n';
  out_.flush();
}

}  // namespace dualspeech
