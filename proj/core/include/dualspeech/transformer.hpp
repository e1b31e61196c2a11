#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "dualspeech/layers.hpp"
#include "dualspeech/ops.hpp"

namespace dualspeech {

struct TransformerConfig {
  std::size_t num_layers = 4;
  std::size_t model_dim = 256;
  std::size_t ffn_dim = 1024;
  // Head count and dropout are not given by the method description; both are
  // configurable assumptions.
  std::size_t num_heads = 4;
  double dropout = 0.1;
  std::size_t max_seq_len = 2048;

  void validate() const;
};

enum class MaskKind { Padding, Causal, Combined };

/// Which source positions each target position may attend to. Stored
/// implicitly as key lengths plus an optional causal constraint.
struct AttentionMask {
  MaskKind kind = MaskKind::Padding;
  std::vector<std::size_t> key_lengths;
  // Absolute position of query row 0, for incremental decoding.
  std::size_t query_offset = 0;

  static AttentionMask padding(std::vector<std::size_t> key_lengths);
  static AttentionMask causal(std::size_t batch, std::size_t length);
  static AttentionMask combined(std::vector<std::size_t> key_lengths);

  bool is_causal() const { return kind != MaskKind::Padding; }
  bool allowed(std::size_t batch, std::size_t query, std::size_t key) const;
  /// Dense [target_len x source_len] view for one batch entry.
  std::vector<std::vector<bool>> matrix(std::size_t batch, std::size_t target_len,
                                        std::size_t source_len) const;
};

struct MultiHeadAttention {
  Linear query, key, value, output;
  std::size_t heads = 1;

  static MultiHeadAttention init(std::size_t width, std::size_t heads, std::mt19937_64& rng);
  void collect(const std::string& prefix, ParameterList& out) const;
};

/// Project, attend per head, concatenate, project. Rows of the attention
/// weights are distributions over the positions the mask allows.
Tensor multi_head_attention(const Tensor& queries, const Tensor& keys, const Tensor& values,
                            const AttentionMask& mask, const MultiHeadAttention& params);

struct FeedForward {
  Linear inner, outer;
  static FeedForward init(std::size_t width, std::size_t hidden, std::mt19937_64& rng);
  Tensor operator()(const Tensor& x, double dropout, const ForwardContext& ctx) const;
  void collect(const std::string& prefix, ParameterList& out) const;
};

struct EncoderLayer {
  MultiHeadAttention self_attention;
  LayerNorm attention_norm;
  FeedForward feed_forward;
  LayerNorm feed_forward_norm;
};

struct DecoderLayer {
  MultiHeadAttention self_attention;
  LayerNorm self_attention_norm;
  MultiHeadAttention cross_attention;
  LayerNorm cross_attention_norm;
  FeedForward feed_forward;
  LayerNorm feed_forward_norm;
};

/// Sinusoidal position table [max_len, width], not trainable.
Tensor sinusoidal_positions(std::size_t max_len, std::size_t width);

/// Post-norm Transformer encoder: each sublayer is followed by a residual
/// connection and layer normalization.
class EncoderStack {
 public:
  EncoderStack() = default;
  EncoderStack(const TransformerConfig& config, std::mt19937_64& rng);

  /// input [b, t, d] already embedded and position-encoded.
  Tensor encode(const Tensor& input, ops::Lengths lengths, const ForwardContext& ctx) const;

  const TransformerConfig& config() const { return config_; }
  std::vector<EncoderLayer>& layers() { return layers_; }
  void collect(const std::string& prefix, ParameterList& out) const;

 private:
  TransformerConfig config_;
  std::vector<EncoderLayer> layers_;
};

/// Cached keys/values for step-by-step decoding.
struct DecoderCache {
  std::vector<std::size_t> memory_lengths;
  std::vector<Tensor> cross_keys, cross_values;     // per layer [b, src, d]
  std::vector<std::vector<double>> self_keys, self_values;  // per layer, [b, t, d] flattened
  std::size_t batch = 0;
  std::size_t length = 0;
};

class DecoderStack {
 public:
  DecoderStack() = default;
  DecoderStack(const TransformerConfig& config, std::mt19937_64& rng);

  /// Teacher-forced pass over a full target prefix. input [b, t, d].
  Tensor forward(const Tensor& input, ops::Lengths target_lengths, const Tensor& memory,
                 ops::Lengths memory_lengths, const ForwardContext& ctx) const;

  /// Begin incremental decoding against encoder output `memory`.
  DecoderCache start(const Tensor& memory, ops::Lengths memory_lengths) const;
  /// Hidden state [b, 1, d] for the next position given its input [b, 1, d].
  /// Equivalent to the last row of forward() over the whole prefix.
  Tensor step(DecoderCache& cache, const Tensor& input) const;

  const TransformerConfig& config() const { return config_; }
  std::vector<DecoderLayer>& layers() { return layers_; }
  void collect(const std::string& prefix, ParameterList& out) const;

 private:
  TransformerConfig config_;
  std::vector<DecoderLayer> layers_;
};

/// One full-prefix decoder evaluation returning the hidden state at the last
/// prefix position: decode_step(prefix) == forward(prefix)[:, -1].
Tensor decode_step(const DecoderStack& decoder, const Tensor& prefix, const Tensor& memory,
                   ops::Lengths memory_lengths);

}  // namespace dualspeech
