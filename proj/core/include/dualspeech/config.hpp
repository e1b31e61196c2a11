#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dualspeech/corpus.hpp"
#include "dualspeech/dsp.hpp"
#include "dualspeech/model.hpp"
#include "dualspeech/optim.hpp"
#include "dualspeech/training.hpp"

namespace dualspeech {

/// Every tunable of a run. model.vocab_size is filled from the corpus at run time.
struct RunConfig {
  ModelConfig model;
  StftConfig stft;
  TrainingConfig training;
  AdamConfig adam;
  SplitConfig split;
  std::uint64_t model_seed = 1;
  std::uint64_t split_seed = 1;
  std::uint64_t steps = 100000;
  std::uint64_t checkpoint_every = 1000;
  std::size_t griffin_lim_iterations = 60;
  std::string corpus_dir;
  std::string output_dir = "run";

  RunConfig();
  /// Ties derived fields together (the schedule's d_model follows model.dim).
  void resolve();
  void validate() const;
};

/// Flat "key = value" lines, '#' starts a comment. Keys not listed by
/// config_keys() and malformed values throw ConfigError naming the line.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
/// Apply a single "key=value" override.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);
/// Every key with its resolved value; parse_config(format_config(c)) == c.
std::string format_config(const RunConfig& cfg);
std::vector<std::string> config_keys();

}  // namespace dualspeech
