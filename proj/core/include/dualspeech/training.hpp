#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dualspeech/corpus.hpp"
#include "dualspeech/model.hpp"
#include "dualspeech/optim.hpp"

namespace dualspeech {

struct CorruptionConfig {
  double mask_prob = 0.3;
  // Window for random in-window swaps after masking; 0 disables swapping.
  std::size_t swap_window = 0;

  void validate() const;
};

/// Each frame independently replaced by a zero frame with probability p,
/// then optional window swaps. Length is preserved.
MelSpectrogram corrupt(const MelSpectrogram& mel, const CorruptionConfig& cfg, std::mt19937_64& rng);
/// Content symbols independently replaced by MASK; a trailing EOS is kept.
PhonemeSequence corrupt(const PhonemeSequence& seq, const CorruptionConfig& cfg, std::mt19937_64& rng);

/// Reverses content order; a trailing EOS stays last.
PhonemeSequence reverse_seq(const PhonemeSequence& seq);
MelSpectrogram reverse_seq(const MelSpectrogram& mel);

/// `seq` as seen in direction `dir`: unchanged for left-to-right.
PhonemeSequence in_direction(const PhonemeSequence& seq, DirectionTag dir);
MelSpectrogram in_direction(const MelSpectrogram& mel, DirectionTag dir);

struct SpeechLossParts {
  Tensor total;
  Tensor mse_before;
  Tensor mse_after;
  Tensor stop;
};

/// Stop targets for a batch: 1 on each sequence's final frame, 0 elsewhere.
std::vector<double> stop_targets(const std::vector<std::size_t>& lengths, std::size_t time);

/// MSE(target, mel_before) + MSE(target, mel_after) + weighted stop BCE, all
/// masked means over valid frames.
SpeechLossParts speech_loss(const SpeechBatch& target, const SpeechOutputs& predicted,
                            double stop_positive_weight);
/// Masked mean NLL of the target ids under softmax(logits).
Tensor text_loss(const TextBatch& target, const Tensor& logits);

struct DecodeLimits {
  // Text decodes stop after text_per_frame * source frames content symbols.
  double text_per_frame = 0.5;
  // Speech decodes stop after speech_per_phoneme * source length frames.
  double speech_per_phoneme = 8.0;
  double stop_threshold = 0.5;
};

struct TextDecode {
  std::vector<PhonemeSequence> sequences;  // EOS-terminated, in decoding order
  std::vector<bool> truncated;
};
struct SpeechDecode {
  std::vector<MelSpectrogram> mels;  // post-net output, in decoding order
  std::vector<bool> truncated;
};

/// Greedy ASR: the speech encoder reads the source in direction `dir`, the
/// text decoder emits symbols (never PAD or MASK) until EOS or the cap.
/// With use_start false the decoder starts from a zero vector.
TextDecode asr_transform(const Model& model, const std::vector<const MelSpectrogram*>& sources,
                         DirectionTag dir, bool use_start, const DecodeLimits& limits);
/// Autoregressive TTS feeding back each predicted pre-post-net frame until the
/// stop probability exceeds the threshold (that frame is kept) or the cap.
SpeechDecode tts_transform(const Model& model, const std::vector<const PhonemeSequence*>& sources,
                           DirectionTag dir, bool use_start, const DecodeLimits& limits);

struct TrainingConfig {
  CorruptionConfig corruption;
  AblationFlags ablation;
  std::size_t group_size = 32;
  double stop_positive_weight = 5.0;
  DecodeLimits limits;
};

/// The six objective terms (DAE, DT and supervised, per direction), their sum,
/// and a per-group and per-part breakdown.
struct LossReport {
  double dae_l2r = 0, dae_r2l = 0, dt_l2r = 0, dt_r2l = 0, sup_l2r = 0, sup_r2l = 0;
  double total = 0;
  std::vector<std::pair<std::string, double>> groups;
  double speech_mse = 0, text_nll = 0, stop_bce = 0;

  double six_term_sum() const { return dae_l2r + dae_r2l + dt_l2r + dt_r2l + sup_l2r + sup_r2l; }
  /// Every reported value as (term, value), in a fixed order.
  std::vector<std::pair<std::string, double>> entries() const;
};

/// Everything that evolves during training.
struct TrainState {
  Model model;
  OptimizerState optimizer;
  std::mt19937_64 rng;

  std::uint64_t step() const { return optimizer.step; }
};

TrainState init_train_state(const ModelConfig& model, const AdamConfig& adam, std::uint64_t seed);

/// Loss of one group with every generated source already materialized.
/// Sources and targets are in the group's direction.
struct GroupExamples {
  std::vector<MelSpectrogram> speech_sources;
  std::vector<PhonemeSequence> text_sources;
  std::vector<MelSpectrogram> speech_targets;
  std::vector<PhonemeSequence> text_targets;
};

/// Build the sources/targets of a group from its sampled items (running the
/// current model for dual transformation).
GroupExamples prepare_group(const Model& model, const CorpusPartition& partition, const BatchGroup& group,
                            const TrainingConfig& cfg, std::mt19937_64& rng);

struct GroupLoss {
  Tensor loss;
  SpeechLossParts speech;  // set when the target is speech
};

GroupLoss group_loss(const Model& model, const GroupSpec& spec, const GroupExamples& examples,
                     const TrainingConfig& cfg, const ForwardContext& ctx);

/// One step: sample the batch plan, compute every group loss, one backward
/// pass over their sum, one Adam update. Throws NumericError naming the
/// first non-finite term.
LossReport train_step(const CorpusPartition& partition, TrainState& state, const TrainingConfig& cfg);

}  // namespace dualspeech
