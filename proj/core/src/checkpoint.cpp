#include "dualspeech/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dualspeech/error.hpp"

namespace dualspeech {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[4] = {'D', 'S', 'C', 'K'};

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void str(const std::string& s) {
    u64(s.size());
    raw(s.data(), s.size());
  }
  void reals(const std::vector<double>& v) { raw(v.data(), v.size() * sizeof(double)); }
  void raw(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  Reader(std::istream& in, std::string name) : in_(in), name_(std::move(name)) {}
  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, sizeof v);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    raw(&v, sizeof v);
    return v;
  }
  std::string str() {
    const std::uint64_t n = u64();
    if (n > (std::uint64_t{1} << 32)) fail("implausible string length");
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
  }
  std::vector<double> reals(std::size_t n) {
    std::vector<double> v(n);
    raw(v.data(), n * sizeof(double));
    return v;
  }
  void raw(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!in_) fail("truncated file");
  }
  [[noreturn]] void fail(const std::string& why) const { throw DataError("checkpoint " + name_ + ": " + why); }

 private:
  std::istream& in_;
  std::string name_;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const TrainState& state, const RunConfig& config,
                     const PhonemeVocab& vocab) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    Writer w(out);
    w.raw(kMagic, 4);
    w.u32(kCheckpointVersion);
    w.str("f8");
    w.str(format_config(config));
    w.u64(vocab.symbols().size());
    for (const std::string& s : vocab.symbols()) w.str(s);
    w.u64(state.optimizer.step);
    std::ostringstream rng;
    rng << state.rng;
    w.str(rng.str());
    const ParameterList params = state.model.named_parameters();
    w.u64(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      const Tensor& t = params[i].tensor;
      w.str(params[i].name);
      w.u32(static_cast<std::uint32_t>(t.rank()));
      for (std::size_t d : t.shape()) w.u64(d);
      w.reals({t.data().begin(), t.data().end()});
      w.reals(state.optimizer.first_moment.at(i));
      w.reals(state.optimizer.second_moment.at(i));
    }
    if (!out) throw DataError("failed writing checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  Reader r(in, path.string());
  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) r.fail("not a checkpoint file");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    r.fail("version " + std::to_string(version) + " is not supported (expected " +
           std::to_string(kCheckpointVersion) + ")");
  if (const std::string dtype = r.str(); dtype != "f8") r.fail("unsupported value type " + dtype);

  RunConfig config;
  try {
    config = parse_config(r.str());
  } catch (const ConfigError& e) {
    r.fail(std::string("config snapshot: ") + e.what());
  }
  std::vector<std::string> symbols(r.u64());
  for (std::string& s : symbols) s = r.str();
  const std::size_t specials = PhonemeVocab::kNumSpecials;
  if (symbols.size() < specials) r.fail("vocabulary lacks the special symbols");
  PhonemeVocab vocab(std::vector<std::string>(symbols.begin() + specials, symbols.end()));
  if (vocab.symbols() != symbols) r.fail("vocabulary special symbols do not match");
  config.model.vocab_size = vocab.size();

  const std::uint64_t step = r.u64();
  const std::string rng_state = r.str();

  Checkpoint ck{config, vocab, init_train_state(config.model, config.adam, config.model_seed)};
  std::istringstream rng_in(rng_state);
  rng_in >> ck.state.rng;
  if (!rng_in) r.fail("bad generator state");
  ck.state.optimizer.step = step;

  ParameterList params = ck.state.model.named_parameters();
  if (r.u64() != params.size()) r.fail("parameter count does not match the config");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string name = r.str();
    if (name != params[i].name) r.fail("expected parameter " + params[i].name + ", found " + name);
    Shape shape(r.u32());
    for (std::size_t& d : shape) d = r.u64();
    if (shape != params[i].tensor.shape())
      r.fail("shape of " + name + " is " + shape_string(shape) + ", config expects " +
             shape_string(params[i].tensor.shape()));
    const std::size_t n = numel(shape);
    const std::vector<double> values = r.reals(n);
    std::copy(values.begin(), values.end(), params[i].tensor.mutable_data().begin());
    ck.state.optimizer.first_moment[i] = r.reals(n);
    ck.state.optimizer.second_moment[i] = r.reals(n);
  }
  return ck;
}

}  // namespace dualspeech
