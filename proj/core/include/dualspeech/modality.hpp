#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dualspeech/layers.hpp"
#include "dualspeech/ops.hpp"

namespace dualspeech {

enum class Domain { Speech, Text };
enum class DirectionTag { LeftToRight, RightToLeft };

const char* to_string(Domain domain);
const char* to_string(DirectionTag dir);
inline DirectionTag opposite(DirectionTag dir) {
  return dir == DirectionTag::LeftToRight ? DirectionTag::RightToLeft : DirectionTag::LeftToRight;
}

/// Padded speech batch: frames [b, t, n_mels].
struct SpeechBatch {
  Tensor frames;
  std::vector<std::size_t> lengths;
  std::size_t batch() const { return lengths.size(); }
  std::size_t time() const { return frames.dim(1); }
};

/// Padded phoneme batch, ids row-major [b, t], PAD beyond each length.
struct TextBatch {
  std::vector<std::int32_t> ids;
  std::vector<std::size_t> lengths;
  std::size_t time = 0;
  std::size_t batch() const { return lengths.size(); }
};

/// Two dense layers: ReLU hidden layer, linear projection to model_dim.
struct SpeechPrenet {
  Linear hidden;
  Linear output;
  double dropout = 0.5;

  static SpeechPrenet init(std::size_t n_mels, std::size_t hidden, std::size_t model_dim,
                           double dropout, std::mt19937_64& rng);
  /// Per-frame map [b, t, n_mels] -> [b, t, model_dim]; dropout only in training.
  Tensor operator()(const Tensor& frames, const ForwardContext& ctx) const;
  void collect(const std::string& prefix, ParameterList& out) const;
};

struct SpeechOutputs {
  Tensor mel_before;  // [b, t, n_mels]
  Tensor mel_after;   // mel_before + postnet(mel_before)
  Tensor stop_prob;   // [b, t, 1]
};

struct ConvLayer {
  Tensor weight;  // [kernel, in, out]
  Tensor bias;    // [out]
};

/// Stop projection + sigmoid, mel projection, and a residual 1-D conv
/// post-net (tanh on all but the last layer, last layer zero-initialized).
struct SpeechOutputHead {
  Linear stop;
  Linear mel;
  std::vector<ConvLayer> postnet;

  static SpeechOutputHead init(std::size_t model_dim, std::size_t n_mels, std::size_t postnet_hidden,
                               std::size_t postnet_layers, std::size_t kernel, std::mt19937_64& rng);
  SpeechOutputs operator()(const Tensor& hidden, ops::Lengths lengths) const;
  Tensor run_postnet(const Tensor& mel_before, ops::Lengths lengths) const;
  void collect(const std::string& prefix, ParameterList& out) const;
};

/// One [vocab, model_dim] matrix used as the input embedding and, transposed,
/// as the output projection.
struct TiedPhonemeEmbedding {
  Tensor table;

  static TiedPhonemeEmbedding init(std::size_t vocab, std::size_t model_dim, std::mt19937_64& rng);
  /// Rows for ids scaled by sqrt(model_dim); PAD and MASK ids map to zero rows.
  Tensor embed(std::span<const std::int32_t> ids, std::size_t batch, std::size_t time) const;
  /// hidden [.., d] -> logits [.., vocab] = hidden · table^T.
  Tensor project(const Tensor& hidden) const;
  std::size_t vocab_size() const { return table.dim(0); }
};

/// The four learnable decoder start elements, one per (domain, direction).
struct DirectionStartEmbeddings {
  std::array<Tensor, 4> vectors;

  static DirectionStartEmbeddings init(std::size_t model_dim, std::mt19937_64& rng);
  const Tensor& get(Domain domain, DirectionTag dir) const;
  static std::size_t index(Domain domain, DirectionTag dir);
  void collect(const std::string& prefix, ParameterList& out) const;
};

}  // namespace dualspeech
