#include "dualspeech/training.hpp"

#include <algorithm>
#include <cmath>

#include "dualspeech/error.hpp"

namespace dualspeech {

void CorruptionConfig::validate() const {
  DUALSPEECH_EXPECT(mask_prob >= 0.0 && mask_prob <= 1.0, "corruption: mask_prob must be in [0, 1]");
  DUALSPEECH_EXPECT(swap_window == 0 || swap_window >= 2, "corruption: swap_window must be 0 or >= 2");
}

namespace {

bool draw_mask(double p, std::mt19937_64& rng) {
  if (p <= 0.0) return false;
  if (p >= 1.0) return true;
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

// Shuffle each consecutive window of `window` positions among [0, n).
template <typename SwapFn>
void window_swaps(std::size_t n, std::size_t window, std::mt19937_64& rng, SwapFn swap) {
  for (std::size_t start = 0; start + 1 < n; start += window) {
    const std::size_t end = std::min(n, start + window);
    for (std::size_t i = end - 1; i > start; --i) swap(i, start + rng() % (i - start + 1));
  }
}

std::size_t content_length(const PhonemeSequence& seq) {
  return !seq.empty() && seq.back() == PhonemeVocab::kEos ? seq.size() - 1 : seq.size();
}

}  // namespace

MelSpectrogram corrupt(const MelSpectrogram& mel, const CorruptionConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  MelSpectrogram out = mel;
  const std::size_t frames = out.n_frames();
  for (std::size_t t = 0; t < frames; ++t)
    if (draw_mask(cfg.mask_prob, rng))
      std::fill_n(out.values.begin() + static_cast<std::ptrdiff_t>(t * out.n_mels), out.n_mels, 0.0);
  if (cfg.swap_window >= 2)
    window_swaps(frames, cfg.swap_window, rng, [&](std::size_t a, std::size_t b) {
      std::swap_ranges(out.values.begin() + static_cast<std::ptrdiff_t>(a * out.n_mels),
                       out.values.begin() + static_cast<std::ptrdiff_t>((a + 1) * out.n_mels),
                       out.values.begin() + static_cast<std::ptrdiff_t>(b * out.n_mels));
    });
  return out;
}

PhonemeSequence corrupt(const PhonemeSequence& seq, const CorruptionConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  PhonemeSequence out = seq;
  const std::size_t n = content_length(out);
  for (std::size_t i = 0; i < n; ++i)
    if (draw_mask(cfg.mask_prob, rng)) out[i] = PhonemeVocab::kMask;
  if (cfg.swap_window >= 2)
    window_swaps(n, cfg.swap_window, rng, [&](std::size_t a, std::size_t b) { std::swap(out[a], out[b]); });
  return out;
}

PhonemeSequence reverse_seq(const PhonemeSequence& seq) {
  PhonemeSequence out = seq;
  std::reverse(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(content_length(out)));
  return out;
}

MelSpectrogram reverse_seq(const MelSpectrogram& mel) {
  MelSpectrogram out{mel.n_mels, std::vector<double>(mel.values.size())};
  const std::size_t frames = mel.n_frames();
  for (std::size_t t = 0; t < frames; ++t)
    std::copy_n(mel.values.begin() + static_cast<std::ptrdiff_t>(t * mel.n_mels), mel.n_mels,
                out.values.begin() + static_cast<std::ptrdiff_t>((frames - 1 - t) * mel.n_mels));
  return out;
}

PhonemeSequence in_direction(const PhonemeSequence& seq, DirectionTag dir) {
  return dir == DirectionTag::LeftToRight ? seq : reverse_seq(seq);
}

MelSpectrogram in_direction(const MelSpectrogram& mel, DirectionTag dir) {
  return dir == DirectionTag::LeftToRight ? mel : reverse_seq(mel);
}

std::vector<double> stop_targets(const std::vector<std::size_t>& lengths, std::size_t time) {
  std::vector<double> out(lengths.size() * time, 0.0);
  for (std::size_t b = 0; b < lengths.size(); ++b)
    if (lengths[b] > 0) out[b * time + lengths[b] - 1] = 1.0;
  return out;
}

SpeechLossParts speech_loss(const SpeechBatch& target, const SpeechOutputs& predicted,
                            double stop_positive_weight) {
  DUALSPEECH_EXPECT(predicted.mel_before.shape() == target.frames.shape() &&
                        predicted.mel_after.shape() == target.frames.shape(),
                    "speech_loss: prediction and target shapes differ");
  SpeechLossParts parts;
  parts.mse_before = ops::mse_masked(predicted.mel_before, target.frames, target.lengths);
  parts.mse_after = ops::mse_masked(predicted.mel_after, target.frames, target.lengths);
  parts.stop = ops::bce_masked(predicted.stop_prob, stop_targets(target.lengths, target.time()),
                               target.lengths, stop_positive_weight);
  parts.total = ops::add(ops::add(parts.mse_before, parts.mse_after), parts.stop);
  return parts;
}

Tensor text_loss(const TextBatch& target, const Tensor& logits) {
  DUALSPEECH_EXPECT(logits.rank() == 3 && logits.dim(0) == target.batch() && logits.dim(1) == target.time,
                    "text_loss: logits must be [batch, time, vocab]");
  return ops::nll_masked(logits, target.ids, target.lengths);
}

std::vector<std::pair<std::string, double>> LossReport::entries() const {
  std::vector<std::pair<std::string, double>> out = {
      {"total", total},   {"dae_l2r", dae_l2r}, {"dae_r2l", dae_r2l},       {"dt_l2r", dt_l2r},
      {"dt_r2l", dt_r2l}, {"sup_l2r", sup_l2r}, {"sup_r2l", sup_r2l},       {"speech_mse", speech_mse},
      {"stop_bce", stop_bce}, {"text_nll", text_nll}};
  for (auto& [name, value] : groups) out.emplace_back("group." + name, value);
  return out;
}

TrainState init_train_state(const ModelConfig& model, const AdamConfig& adam, std::uint64_t seed) {
  TrainState s{Model(model, seed), {}, std::mt19937_64(seed ^ 0x9e3779b97f4a7c15ULL)};
  const std::vector<Tensor> params = s.model.parameters();
  s.optimizer = OptimizerState::for_parameters(params, adam);
  return s;
}

GroupExamples prepare_group(const Model& model, const CorpusPartition& partition, const BatchGroup& group,
                            const TrainingConfig& cfg, std::mt19937_64& rng) {
  const GroupSpec& spec = group.spec;
  const DirectionTag dir = spec.dir;
  const bool use_start = cfg.ablation.bsm;
  GroupExamples ex;
  switch (spec.kind) {
    case LossKind::Dae:
      for (std::size_t i : group.items) {
        if (spec.target == Domain::Speech) {
          ex.speech_targets.push_back(in_direction(*partition.speech.at(i).mel, dir));
          ex.speech_sources.push_back(corrupt(ex.speech_targets.back(), cfg.corruption, rng));
        } else {
          ex.text_targets.push_back(in_direction(*partition.text.at(i).text, dir));
          ex.text_sources.push_back(corrupt(ex.text_targets.back(), cfg.corruption, rng));
        }
      }
      break;
    case LossKind::Dt: {
      // Generate with the current model in the source's decoding direction;
      // cross-direction outputs are reversed into this group's direction.
      const DirectionTag gen_dir = spec.dt_source == DtSource::Cross ? opposite(dir) : dir;
      const bool flip = gen_dir != dir;
      if (spec.target == Domain::Speech) {
        std::vector<const MelSpectrogram*> xs;
        for (std::size_t i : group.items) xs.push_back(&*partition.speech.at(i).mel);
        TextDecode gen = asr_transform(model, xs, gen_dir, use_start, cfg.limits);
        for (std::size_t k = 0; k < xs.size(); ++k) {
          ex.text_sources.push_back(flip ? reverse_seq(gen.sequences[k]) : std::move(gen.sequences[k]));
          ex.speech_targets.push_back(in_direction(*xs[k], dir));
        }
      } else {
        std::vector<const PhonemeSequence*> ys;
        for (std::size_t i : group.items) ys.push_back(&*partition.text.at(i).text);
        SpeechDecode gen = tts_transform(model, ys, gen_dir, use_start, cfg.limits);
        for (std::size_t k = 0; k < ys.size(); ++k) {
          ex.speech_sources.push_back(flip ? reverse_seq(gen.mels[k]) : std::move(gen.mels[k]));
          ex.text_targets.push_back(in_direction(*ys[k], dir));
        }
      }
      break;
    }
    case LossKind::Sup:
      for (std::size_t i : group.items) {
        const Utterance& u = partition.paired.at(i);
        if (spec.target == Domain::Speech) {
          ex.text_sources.push_back(in_direction(*u.text, dir));
          ex.speech_targets.push_back(in_direction(*u.mel, dir));
        } else {
          ex.speech_sources.push_back(in_direction(*u.mel, dir));
          ex.text_targets.push_back(in_direction(*u.text, dir));
        }
      }
      break;
  }
  return ex;
}

GroupLoss group_loss(const Model& model, const GroupSpec& spec, const GroupExamples& ex,
                     const TrainingConfig& cfg, const ForwardContext& ctx) {
  const Domain source = spec.kind == LossKind::Dae
                            ? spec.target
                            : (spec.target == Domain::Speech ? Domain::Text : Domain::Speech);
  Tensor memory;
  std::vector<std::size_t> memory_lengths;
  if (source == Domain::Speech) {
    std::vector<const MelSpectrogram*> ptrs;
    for (auto& m : ex.speech_sources) ptrs.push_back(&m);
    const SpeechBatch batch = speech_batch(ptrs);
    memory = model.encoder(source).encode(model.speech_input(batch, ctx), batch.lengths, ctx);
    memory_lengths = batch.lengths;
  } else {
    std::vector<const PhonemeSequence*> ptrs;
    for (auto& s : ex.text_sources) ptrs.push_back(&s);
    const TextBatch batch = text_batch(ptrs);
    memory = model.encoder(source).encode(model.text_input(batch), batch.lengths, ctx);
    memory_lengths = batch.lengths;
  }
  const Tensor start = cfg.ablation.bsm ? model.start_frame(spec.target, spec.dir) : Tensor();
  const DecoderStack& decoder = model.decoder(spec.target);
  GroupLoss out;
  if (spec.target == Domain::Speech) {
    std::vector<const MelSpectrogram*> ptrs;
    for (auto& m : ex.speech_targets) ptrs.push_back(&m);
    const SpeechBatch target = speech_batch(ptrs);
    const Tensor hidden = decoder.forward(model.speech_decoder_input(target, start, ctx), target.lengths,
                                          memory, memory_lengths, ctx);
    out.speech = speech_loss(target, model.speech_output(hidden, target.lengths), cfg.stop_positive_weight);
    out.loss = out.speech.total;
  } else {
    std::vector<const PhonemeSequence*> ptrs;
    for (auto& s : ex.text_targets) ptrs.push_back(&s);
    const TextBatch target = text_batch(ptrs);
    const Tensor hidden =
        decoder.forward(model.text_decoder_input(target, start), target.lengths, memory, memory_lengths, ctx);
    out.loss = text_loss(target, model.text_output(hidden));
  }
  return out;
}

LossReport train_step(const CorpusPartition& partition, TrainState& state, const TrainingConfig& cfg) {
  cfg.corruption.validate();
  const BatchPlan plan = make_batch(partition, plan_groups(cfg.ablation), cfg.group_size, state.rng);
  std::vector<Tensor> params = state.model.parameters();
  for (Tensor& p : params) p.zero_grad();

  // Every DT source is generated before any loss is built, from the
  // parameters as they stand at the start of the step.
  std::vector<GroupExamples> examples;
  for (const BatchGroup& g : plan.groups)
    examples.push_back(prepare_group(state.model, partition, g, cfg, state.rng));

  const ForwardContext ctx{&state.rng};
  LossReport report;
  Tensor total;
  for (std::size_t i = 0; i < plan.groups.size(); ++i) {
    const GroupSpec& spec = plan.groups[i].spec;
    const GroupLoss gl = group_loss(state.model, spec, examples[i], cfg, ctx);
    const double value = gl.loss.item();
    if (!std::isfinite(value)) throw NumericError(spec.name(), "non-finite loss in term " + spec.name());
    report.groups.emplace_back(spec.name(), value);
    const bool l2r = spec.dir == DirectionTag::LeftToRight;
    double& term = spec.kind == LossKind::Dae ? (l2r ? report.dae_l2r : report.dae_r2l)
                   : spec.kind == LossKind::Dt ? (l2r ? report.dt_l2r : report.dt_r2l)
                                               : (l2r ? report.sup_l2r : report.sup_r2l);
    term += value;
    if (spec.target == Domain::Speech) {
      report.speech_mse += gl.speech.mse_before.item() + gl.speech.mse_after.item();
      report.stop_bce += gl.speech.stop.item();
    } else {
      report.text_nll += value;
    }
    total = total.defined() ? ops::add(total, gl.loss) : gl.loss;
  }
  report.total = report.six_term_sum();
  backward(total);
  adam_step(params, state.optimizer);
  return report;
}

}  // namespace dualspeech
