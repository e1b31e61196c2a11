#include "dualspeech/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "dualspeech/error.hpp"
#include "dualspeech/formats.hpp"

namespace dualspeech {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_integer(const std::string& key, const std::string& v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <typename Access>
Field size_field(std::string key, Access access) {
  return {key, [access](const RunConfig& c) { return std::to_string(access(const_cast<RunConfig&>(c))); },
          [access, key](RunConfig& c, const std::string& v) {
            using T = std::remove_reference_t<decltype(access(c))>;
            access(c) = parse_integer<T>(key, v);
          }};
}

template <typename Access>
Field real_field(std::string key, Access access) {
  return {key, [access](const RunConfig& c) { return format_double(access(const_cast<RunConfig&>(c))); },
          [access, key](RunConfig& c, const std::string& v) { access(c) = parse_real(key, v); }};
}

template <typename Access>
Field bool_field(std::string key, Access access) {
  return {key, [access](const RunConfig& c) { return std::string(access(const_cast<RunConfig&>(c)) ? "true" : "false"); },
          [access, key](RunConfig& c, const std::string& v) { access(c) = parse_bool(key, v); }};
}

template <typename Access>
Field string_field(std::string key, Access access) {
  return {key, [access](const RunConfig& c) { return access(const_cast<RunConfig&>(c)); },
          [access](RunConfig& c, const std::string& v) { access(c) = v; }};
}

#define FIELD(kind, key, member) kind##_field(key, [](RunConfig& c) -> auto& { return c.member; })

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      FIELD(size, "model.layers", model.transformer.num_layers),
      FIELD(size, "model.dim", model.transformer.model_dim),
      FIELD(size, "model.ffn_dim", model.transformer.ffn_dim),
      FIELD(size, "model.heads", model.transformer.num_heads),
      FIELD(real, "model.dropout", model.transformer.dropout),
      FIELD(size, "model.max_seq_len", model.transformer.max_seq_len),
      FIELD(size, "model.n_mels", model.n_mels),
      FIELD(size, "model.prenet_hidden", model.prenet_hidden),
      FIELD(real, "model.prenet_dropout", model.prenet_dropout),
      FIELD(size, "model.postnet_hidden", model.postnet_hidden),
      FIELD(size, "model.postnet_layers", model.postnet_layers),
      FIELD(size, "model.postnet_kernel", model.postnet_kernel),
      FIELD(size, "stft.sample_rate", stft.sample_rate),
      FIELD(size, "stft.frame_length", stft.frame_length),
      FIELD(size, "stft.hop_length", stft.hop_length),
      FIELD(size, "stft.fft_size", stft.fft_size),
      FIELD(real, "corruption.mask_prob", training.corruption.mask_prob),
      FIELD(size, "corruption.swap_window", training.corruption.swap_window),
      FIELD(bool, "ablation.dae", training.ablation.dae),
      FIELD(bool, "ablation.dt", training.ablation.dt),
      FIELD(bool, "ablation.bsm", training.ablation.bsm),
      FIELD(size, "train.group_size", training.group_size),
      FIELD(real, "train.stop_positive_weight", training.stop_positive_weight),
      FIELD(size, "train.steps", steps),
      FIELD(size, "train.checkpoint_every", checkpoint_every),
      FIELD(size, "train.seed", model_seed),
      FIELD(real, "decode.text_per_frame", training.limits.text_per_frame),
      FIELD(real, "decode.speech_per_phoneme", training.limits.speech_per_phoneme),
      FIELD(real, "decode.stop_threshold", training.limits.stop_threshold),
      FIELD(size, "decode.griffin_lim_iterations", griffin_lim_iterations),
      FIELD(real, "adam.beta1", adam.beta1),
      FIELD(real, "adam.beta2", adam.beta2),
      FIELD(real, "adam.epsilon", adam.epsilon),
      FIELD(size, "adam.warmup_steps", adam.warmup_steps),
      FIELD(real, "adam.lr_scale", adam.lr_scale),
      FIELD(size, "split.train", split.train),
      FIELD(size, "split.val", split.val),
      FIELD(size, "split.test", split.test),
      FIELD(size, "split.paired", split.paired),
      FIELD(bool, "split.disjoint_halves", split.disjoint_halves),
      FIELD(size, "split.seed", split_seed),
      FIELD(string, "paths.corpus", corpus_dir),
      FIELD(string, "paths.output", output_dir),
  };
  return table;
}

#undef FIELD

}  // namespace

RunConfig::RunConfig() {
  model.transformer.max_seq_len = 2048;
  resolve();
}

void RunConfig::resolve() { adam.d_model = model.transformer.model_dim; }

void RunConfig::validate() const {
  try {
    model.transformer.validate();
    stft.validate();
    training.corruption.validate();
  } catch (const ContractViolation& e) {
    throw ConfigError(e.what());
  }
  if (model.n_mels == 0 || model.prenet_hidden == 0 || model.postnet_hidden == 0 || model.postnet_layers == 0)
    throw ConfigError("model sizes must be positive");
  if (model.postnet_kernel % 2 == 0) throw ConfigError("model.postnet_kernel must be odd");
  if (training.group_size == 0) throw ConfigError("train.group_size must be positive");
  if (adam.warmup_steps == 0) throw ConfigError("adam.warmup_steps must be positive");
  if (griffin_lim_iterations == 0) throw ConfigError("decode.griffin_lim_iterations must be positive");
  if (split.paired > split.train) throw ConfigError("split.paired exceeds split.train");
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const Field& f : fields())
    if (f.key == key) {
      f.set(cfg, value);
      cfg.resolve();
      return;
    }
  throw ConfigError("unknown config key '" + key + "'");
}

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    try {
      set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_config(text.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string format_config(const RunConfig& cfg) {
  std::string out;
  for (const Field& f : fields()) out += f.key + " = " + f.get(cfg) + "\n";
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const Field& f : fields()) out.push_back(f.key);
  return out;
}

}  // namespace dualspeech
