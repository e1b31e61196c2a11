#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "dualspeech/modality.hpp"
#include "dualspeech/transformer.hpp"

namespace dualspeech {

struct ModelConfig {
  TransformerConfig transformer;
  std::size_t n_mels = 80;
  std::size_t prenet_hidden = 256;
  double prenet_dropout = 0.5;
  std::size_t postnet_hidden = 256;
  std::size_t postnet_layers = 5;
  std::size_t postnet_kernel = 5;
  std::size_t vocab_size = 0;

  void validate() const;
};

/// Speech and text encoders/decoders (four independent stacks) plus the
/// modality input/output modules and direction-start embeddings.
class Model {
 public:
  Model() = default;
  Model(const ModelConfig& config, std::uint64_t seed);
  // Tensors are shared handles; a copy would alias every parameter.
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  const ModelConfig& config() const { return config_; }

  /// Every trainable tensor, in a fixed order with stable names.
  ParameterList named_parameters() const;
  std::vector<Tensor> parameters() const;

  const EncoderStack& encoder(Domain domain) const;
  const DecoderStack& decoder(Domain domain) const;
  EncoderStack& encoder(Domain domain);
  DecoderStack& decoder(Domain domain);

  // Modality input modules. Outputs are position-encoded and ready for a stack.
  Tensor speech_input(const SpeechBatch& batch, const ForwardContext& ctx) const;
  Tensor text_input(const TextBatch& batch) const;
  Tensor encoder_input(Domain domain, const SpeechBatch* speech, const TextBatch* text,
                       const ForwardContext& ctx) const;

  /// Teacher-forced decoder inputs: position 0 holds `start` (zeros when
  /// undefined), position t the embedding of target t-1.
  Tensor speech_decoder_input(const SpeechBatch& target, const Tensor& start,
                              const ForwardContext& ctx) const;
  Tensor text_decoder_input(const TextBatch& target, const Tensor& start) const;

  SpeechOutputs speech_output(const Tensor& hidden, ops::Lengths lengths) const;
  Tensor text_output(const Tensor& hidden) const;

  /// The learnable start element for (domain, dir).
  const Tensor& start_frame(Domain domain, DirectionTag dir) const;

  const SpeechPrenet& prenet() const { return prenet_; }
  const SpeechOutputHead& speech_head() const { return speech_head_; }
  const TiedPhonemeEmbedding& phonemes() const { return phonemes_; }
  const DirectionStartEmbeddings& starts() const { return starts_; }
  const Tensor& positions() const { return positions_; }

 private:
  ModelConfig config_;
  EncoderStack speech_encoder_, text_encoder_;
  DecoderStack speech_decoder_, text_decoder_;
  SpeechPrenet prenet_;
  SpeechOutputHead speech_head_;
  TiedPhonemeEmbedding phonemes_;
  DirectionStartEmbeddings starts_;
  Tensor positions_;
};

/// Element-wise copy of parameter values (same architecture required).
void copy_parameters(const Model& from, Model& to);

}  // namespace dualspeech
