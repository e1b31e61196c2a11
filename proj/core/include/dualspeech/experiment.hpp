#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "dualspeech/checkpoint.hpp"
#include "dualspeech/config.hpp"
#include "dualspeech/eval.hpp"

namespace dualspeech {

struct ExperimentData {
  PhonemeVocab vocab;
  std::vector<Utterance> utterances;
  CorpusPartition partition;
};

/// Corpus directory named by cfg.corpus_dir, split with cfg.split/split_seed.
ExperimentData load_experiment_data(const RunConfig& cfg);
/// Split already-loaded utterances with cfg.split/split_seed.
ExperimentData make_experiment_data(const RunConfig& cfg, PhonemeVocab vocab, std::vector<Utterance> utterances);

/// Fresh state for cfg with the vocabulary's size.
TrainState new_train_state(RunConfig& cfg, const PhonemeVocab& vocab);

struct TrainOptions {
  // When set: config.txt, loss.csv (appended) and checkpoint.bin are written here.
  std::filesystem::path output_dir;
  std::function<void(std::uint64_t step, const LossReport&)> on_step;
};

/// Train from state.step() up to cfg.steps, logging every report entry per step
/// and checkpointing every cfg.checkpoint_every steps and at the end.
void run_training(TrainState& state, const RunConfig& cfg, const ExperimentData& data, const TrainOptions& options);

/// Greedy left-to-right ASR over utterances in batches, scored with PER
/// (overall and per reference half). use_start selects the learned start.
PerSummary evaluate_asr(const Model& model, const std::vector<Utterance>& utterances, bool use_start,
                        const DecodeLimits& limits, std::size_t batch = 25);
std::vector<PhonemeSequence> recognize(const Model& model, const std::vector<const MelSpectrogram*>& mels,
                                       bool use_start, const DecodeLimits& limits);

enum class SweepKind { Ablation, Paired, MaskProb };
SweepKind parse_sweep_kind(const std::string& name);

struct SweepRow {
  std::string setting;
  PerSummary per;
};

/// One training run per setting from the same seeds, each scored on the
/// test split. Ablation runs the ladder pair-only, +DAE, +DAE+DT, full;
/// Paired and MaskProb take their values from `values` (defaults when empty).
std::vector<SweepRow> run_sweep(SweepKind kind, const RunConfig& base, const ExperimentData& data,
                                const std::vector<double>& values, const TrainOptions& options);
void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows);

}  // namespace dualspeech
