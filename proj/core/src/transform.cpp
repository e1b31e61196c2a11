#include <algorithm>
#include <cmath>

#include "dualspeech/error.hpp"
#include "dualspeech/training.hpp"

namespace dualspeech {

namespace {

// [batch, 1, d] rows all equal to `start` (zeros when undefined).
Tensor start_rows(const Tensor& start, std::size_t batch, std::size_t width) {
  std::vector<double> rows(batch * width, 0.0);
  if (start.defined())
    for (std::size_t b = 0; b < batch; ++b) std::copy(start.data().begin(), start.data().end(), rows.begin() + static_cast<std::ptrdiff_t>(b * width));
  return Tensor::from({batch, 1, width}, std::move(rows));
}

Tensor start_for(const Model& model, Domain domain, DirectionTag dir, bool use_start) {
  return use_start ? model.start_frame(domain, dir) : Tensor();
}

}  // namespace

TextDecode asr_transform(const Model& model, const std::vector<const MelSpectrogram*>& sources,
                         DirectionTag dir, bool use_start, const DecodeLimits& limits) {
  NoGradGuard no_grad;
  const ForwardContext inference;
  const SpeechBatch src = speech_batch(sources, dir == DirectionTag::RightToLeft);
  const std::size_t batch = src.batch();
  const std::size_t width = model.config().transformer.model_dim;
  const Tensor memory = model.encoder(Domain::Speech).encode(model.speech_input(src, inference), src.lengths, inference);
  const DecoderStack& decoder = model.decoder(Domain::Text);
  DecoderCache cache = decoder.start(memory, src.lengths);

  std::vector<std::size_t> caps(batch);
  for (std::size_t b = 0; b < batch; ++b)
    caps[b] = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(limits.text_per_frame * static_cast<double>(src.lengths[b]))));
  const std::size_t longest = *std::max_element(caps.begin(), caps.end());

  TextDecode out;
  out.sequences.assign(batch, {});
  out.truncated.assign(batch, false);
  std::vector<bool> done(batch, false);
  Tensor input = ops::add_time_rows(start_rows(start_for(model, Domain::Text, dir, use_start), batch, width),
                                    model.positions(), 0);
  for (std::size_t t = 0; t <= longest; ++t) {
    const Tensor logits = model.text_output(decoder.step(cache, input));
    const std::size_t vocab = logits.dim(2);
    std::vector<std::int32_t> next(batch, PhonemeVocab::kPad);
    bool all_done = true;
    for (std::size_t b = 0; b < batch; ++b) {
      if (done[b]) continue;
      const double* row = logits.data().data() + b * vocab;
      std::int32_t best = -1;
      for (std::size_t v = 0; v < vocab; ++v) {
        if (v == static_cast<std::size_t>(PhonemeVocab::kPad) || v == static_cast<std::size_t>(PhonemeVocab::kMask))
          continue;
        if (best < 0 || row[v] > row[best]) best = static_cast<std::int32_t>(v);
      }
      if (best != PhonemeVocab::kEos && out.sequences[b].size() >= caps[b]) {
        out.truncated[b] = true;
        best = PhonemeVocab::kEos;
      }
      out.sequences[b].push_back(best);
      if (best == PhonemeVocab::kEos) done[b] = true;
      else all_done = false;
      next[b] = best;
    }
    if (all_done) break;
    input = ops::add_time_rows(model.phonemes().embed(next, batch, 1), model.positions(), t + 1);
  }
  return out;
}

SpeechDecode tts_transform(const Model& model, const std::vector<const PhonemeSequence*>& sources,
                           DirectionTag dir, bool use_start, const DecodeLimits& limits) {
  NoGradGuard no_grad;
  const ForwardContext inference;
  const TextBatch src = text_batch(sources, dir == DirectionTag::RightToLeft);
  const std::size_t batch = src.batch();
  const std::size_t width = model.config().transformer.model_dim;
  const std::size_t n_mels = model.config().n_mels;
  const Tensor memory = model.encoder(Domain::Text).encode(model.text_input(src), src.lengths, inference);
  const DecoderStack& decoder = model.decoder(Domain::Speech);
  DecoderCache cache = decoder.start(memory, src.lengths);
  const SpeechOutputHead& head = model.speech_head();

  std::vector<std::size_t> caps(batch);
  for (std::size_t b = 0; b < batch; ++b)
    caps[b] = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(limits.speech_per_phoneme * static_cast<double>(src.lengths[b]))));
  const std::size_t longest = *std::max_element(caps.begin(), caps.end());

  std::vector<std::vector<double>> frames(batch);
  SpeechDecode out;
  out.truncated.assign(batch, false);
  std::vector<bool> done(batch, false);
  Tensor input = ops::add_time_rows(start_rows(start_for(model, Domain::Speech, dir, use_start), batch, width),
                                    model.positions(), 0);
  for (std::size_t t = 0; t < longest; ++t) {
    const Tensor hidden = decoder.step(cache, input);
    const Tensor mel = head.mel(hidden);
    const Tensor stop = ops::sigmoid(head.stop(hidden));
    bool all_done = true;
    for (std::size_t b = 0; b < batch; ++b) {
      if (done[b]) continue;
      const double* row = mel.data().data() + b * n_mels;
      frames[b].insert(frames[b].end(), row, row + n_mels);
      if (stop.data()[b] > limits.stop_threshold) {
        done[b] = true;
      } else if (frames[b].size() / n_mels >= caps[b]) {
        done[b] = true;
        out.truncated[b] = true;
      } else {
        all_done = false;
      }
    }
    if (all_done) break;
    input = ops::add_time_rows(model.prenet()(mel, inference), model.positions(), t + 1);
  }

  // Post-net refinement over each full decoded sequence.
  std::vector<MelSpectrogram> before(batch);
  std::vector<const MelSpectrogram*> ptrs;
  for (std::size_t b = 0; b < batch; ++b) {
    before[b] = MelSpectrogram{n_mels, std::move(frames[b])};
    ptrs.push_back(&before[b]);
  }
  const SpeechBatch decoded = speech_batch(ptrs);
  const Tensor after = ops::add(decoded.frames, head.run_postnet(decoded.frames, decoded.lengths));
  const std::size_t time = decoded.time();
  for (std::size_t b = 0; b < batch; ++b) {
    const double* base = after.data().data() + b * time * n_mels;
    out.mels.push_back(MelSpectrogram{n_mels, std::vector<double>(base, base + decoded.lengths[b] * n_mels)});
  }
  return out;
}

}  // namespace dualspeech
