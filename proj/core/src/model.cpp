#include "dualspeech/model.hpp"

#include <algorithm>

#include "dualspeech/error.hpp"

namespace dualspeech {

void ModelConfig::validate() const {
  transformer.validate();
  if (n_mels == 0 || prenet_hidden == 0 || postnet_hidden == 0 || postnet_layers == 0)
    throw ContractViolation("modality sizes must be positive");
  if (postnet_kernel % 2 == 0) throw ContractViolation("postnet_kernel must be odd");
  if (vocab_size <= 4) throw ContractViolation("vocab_size must exceed the special symbols");
  if (prenet_dropout < 0.0 || prenet_dropout >= 1.0)
    throw ContractViolation("prenet_dropout must be in [0, 1)");
}

Model::Model(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const std::size_t d = config_.transformer.model_dim;
  speech_encoder_ = EncoderStack(config_.transformer, rng);
  speech_decoder_ = DecoderStack(config_.transformer, rng);
  text_encoder_ = EncoderStack(config_.transformer, rng);
  text_decoder_ = DecoderStack(config_.transformer, rng);
  prenet_ = SpeechPrenet::init(config_.n_mels, config_.prenet_hidden, d, config_.prenet_dropout, rng);
  speech_head_ = SpeechOutputHead::init(d, config_.n_mels, config_.postnet_hidden,
                                        config_.postnet_layers, config_.postnet_kernel, rng);
  phonemes_ = TiedPhonemeEmbedding::init(config_.vocab_size, d, rng);
  starts_ = DirectionStartEmbeddings::init(d, rng);
  positions_ = sinusoidal_positions(config_.transformer.max_seq_len, d);
}

ParameterList Model::named_parameters() const {
  ParameterList out;
  speech_encoder_.collect("speech_encoder", out);
  speech_decoder_.collect("speech_decoder", out);
  text_encoder_.collect("text_encoder", out);
  text_decoder_.collect("text_decoder", out);
  prenet_.collect("speech_prenet", out);
  speech_head_.collect("speech_head", out);
  out.push_back({"phoneme_embedding", phonemes_.table});
  starts_.collect("start", out);
  return out;
}

std::vector<Tensor> Model::parameters() const {
  std::vector<Tensor> out;
  for (auto& p : named_parameters()) out.push_back(p.tensor);
  return out;
}

const EncoderStack& Model::encoder(Domain domain) const {
  return domain == Domain::Speech ? speech_encoder_ : text_encoder_;
}
const DecoderStack& Model::decoder(Domain domain) const {
  return domain == Domain::Speech ? speech_decoder_ : text_decoder_;
}
EncoderStack& Model::encoder(Domain domain) {
  return domain == Domain::Speech ? speech_encoder_ : text_encoder_;
}
DecoderStack& Model::decoder(Domain domain) {
  return domain == Domain::Speech ? speech_decoder_ : text_decoder_;
}

Tensor Model::speech_input(const SpeechBatch& batch, const ForwardContext& ctx) const {
  DUALSPEECH_EXPECT(batch.frames.rank() == 3 && batch.frames.dim(2) == config_.n_mels,
                    "speech_input: frames must have n_mels channels");
  return ops::add_time_rows(prenet_(batch.frames, ctx), positions_);
}

Tensor Model::text_input(const TextBatch& batch) const {
  return ops::add_time_rows(phonemes_.embed(batch.ids, batch.batch(), batch.time), positions_);
}

Tensor Model::encoder_input(Domain domain, const SpeechBatch* speech, const TextBatch* text,
                            const ForwardContext& ctx) const {
  if (domain == Domain::Speech) {
    DUALSPEECH_EXPECT(speech != nullptr, "encoder_input: missing speech batch");
    return speech_input(*speech, ctx);
  }
  DUALSPEECH_EXPECT(text != nullptr, "encoder_input: missing text batch");
  return text_input(*text);
}

Tensor Model::speech_decoder_input(const SpeechBatch& target, const Tensor& start,
                                   const ForwardContext& ctx) const {
  return ops::add_time_rows(ops::shift_right(prenet_(target.frames, ctx), start), positions_);
}

Tensor Model::text_decoder_input(const TextBatch& target, const Tensor& start) const {
  return ops::add_time_rows(
      ops::shift_right(phonemes_.embed(target.ids, target.batch(), target.time), start), positions_);
}

SpeechOutputs Model::speech_output(const Tensor& hidden, ops::Lengths lengths) const {
  return speech_head_(hidden, lengths);
}

Tensor Model::text_output(const Tensor& hidden) const { return phonemes_.project(hidden); }

const Tensor& Model::start_frame(Domain domain, DirectionTag dir) const { return starts_.get(domain, dir); }

void copy_parameters(const Model& from, Model& to) {
  const ParameterList src = from.named_parameters();
  ParameterList dst = to.named_parameters();
  DUALSPEECH_EXPECT(src.size() == dst.size(), "copy_parameters: architecture mismatch");
  for (std::size_t i = 0; i < src.size(); ++i) {
    DUALSPEECH_EXPECT(src[i].name == dst[i].name && src[i].tensor.shape() == dst[i].tensor.shape(),
                      "copy_parameters: architecture mismatch at " + src[i].name);
    auto out = dst[i].tensor.mutable_data();
    std::copy(src[i].tensor.data().begin(), src[i].tensor.data().end(), out.begin());
  }
}

}  // namespace dualspeech
