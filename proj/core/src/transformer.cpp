#include "dualspeech/transformer.hpp"

#include <cmath>

#include "dualspeech/error.hpp"

namespace dualspeech {

void TransformerConfig::validate() const {
  if (num_layers == 0 || model_dim == 0 || ffn_dim == 0 || num_heads == 0 || max_seq_len == 0)
    throw ContractViolation("transformer sizes must be positive");
  if (model_dim % num_heads != 0)
    throw ContractViolation("model_dim must be divisible by num_heads");
  if (dropout < 0.0 || dropout >= 1.0) throw ContractViolation("dropout must be in [0, 1)");
}

AttentionMask AttentionMask::padding(std::vector<std::size_t> key_lengths) {
  return {MaskKind::Padding, std::move(key_lengths), 0};
}

AttentionMask AttentionMask::causal(std::size_t batch, std::size_t length) {
  return {MaskKind::Causal, std::vector<std::size_t>(batch, length), 0};
}

AttentionMask AttentionMask::combined(std::vector<std::size_t> key_lengths) {
  return {MaskKind::Combined, std::move(key_lengths), 0};
}

bool AttentionMask::allowed(std::size_t batch, std::size_t query, std::size_t key) const {
  if (key >= key_lengths.at(batch)) return false;
  return !is_causal() || key <= query_offset + query;
}

std::vector<std::vector<bool>> AttentionMask::matrix(std::size_t batch, std::size_t target_len,
                                                     std::size_t source_len) const {
  std::vector<std::vector<bool>> m(target_len, std::vector<bool>(source_len));
  for (std::size_t i = 0; i < target_len; ++i)
    for (std::size_t j = 0; j < source_len; ++j) m[i][j] = allowed(batch, i, j);
  return m;
}

MultiHeadAttention MultiHeadAttention::init(std::size_t width, std::size_t heads,
                                            std::mt19937_64& rng) {
  MultiHeadAttention mha;
  mha.query = Linear::init(width, width, rng);
  mha.key = Linear::init(width, width, rng);
  mha.value = Linear::init(width, width, rng);
  mha.output = Linear::init(width, width, rng);
  mha.heads = heads;
  return mha;
}

void MultiHeadAttention::collect(const std::string& prefix, ParameterList& out) const {
  query.collect(prefix + ".query", out);
  key.collect(prefix + ".key", out);
  value.collect(prefix + ".value", out);
  output.collect(prefix + ".output", out);
}

Tensor multi_head_attention(const Tensor& queries, const Tensor& keys, const Tensor& values,
                            const AttentionMask& mask, const MultiHeadAttention& params) {
  DUALSPEECH_EXPECT(keys.rank() == 3 && values.rank() == 3 && keys.dim(1) == values.dim(1),
                    "multi_head_attention: key and value lengths must agree");
  const Tensor context =
      ops::attention(params.query(queries), params.key(keys), params.value(values), params.heads,
                     mask.key_lengths, mask.is_causal(), mask.query_offset);
  return params.output(context);
}

FeedForward FeedForward::init(std::size_t width, std::size_t hidden, std::mt19937_64& rng) {
  return {Linear::init(width, hidden, rng), Linear::init(hidden, width, rng)};
}

Tensor FeedForward::operator()(const Tensor& x, double dropout, const ForwardContext& ctx) const {
  return outer(maybe_dropout(ops::relu(inner(x)), dropout, ctx));
}

void FeedForward::collect(const std::string& prefix, ParameterList& out) const {
  inner.collect(prefix + ".inner", out);
  outer.collect(prefix + ".outer", out);
}

Tensor sinusoidal_positions(std::size_t max_len, std::size_t width) {
  std::vector<double> table(max_len * width);
  for (std::size_t pos = 0; pos < max_len; ++pos)
    for (std::size_t i = 0; i < width; ++i) {
      const double exponent = static_cast<double>(2 * (i / 2)) / static_cast<double>(width);
      const double angle = static_cast<double>(pos) / std::pow(10000.0, exponent);
      table[pos * width + i] = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  return Tensor::from({max_len, width}, std::move(table));
}

namespace {

// x -> norm(x + dropout(sublayer(x)))
Tensor residual(const Tensor& x, const Tensor& sub, const LayerNorm& norm, double rate,
                const ForwardContext& ctx) {
  return norm(ops::add(x, maybe_dropout(sub, rate, ctx)));
}

}  // namespace

EncoderStack::EncoderStack(const TransformerConfig& config, std::mt19937_64& rng) : config_(config) {
  config_.validate();
  for (std::size_t i = 0; i < config_.num_layers; ++i) {
    EncoderLayer layer;
    layer.self_attention = MultiHeadAttention::init(config_.model_dim, config_.num_heads, rng);
    layer.attention_norm = LayerNorm::init(config_.model_dim);
    layer.feed_forward = FeedForward::init(config_.model_dim, config_.ffn_dim, rng);
    layer.feed_forward_norm = LayerNorm::init(config_.model_dim);
    layers_.push_back(std::move(layer));
  }
}

Tensor EncoderStack::encode(const Tensor& input, ops::Lengths lengths,
                            const ForwardContext& ctx) const {
  DUALSPEECH_EXPECT(input.rank() == 3 && input.dim(2) == config_.model_dim,
                    "encode: input must be [batch, time, model_dim]");
  DUALSPEECH_EXPECT(input.dim(1) <= config_.max_seq_len, "encode: sequence longer than max_seq_len");
  const AttentionMask mask = AttentionMask::padding({lengths.begin(), lengths.end()});
  Tensor x = input;
  for (const EncoderLayer& layer : layers_) {
    x = residual(x, multi_head_attention(x, x, x, mask, layer.self_attention), layer.attention_norm,
                 config_.dropout, ctx);
    x = residual(x, layer.feed_forward(x, config_.dropout, ctx), layer.feed_forward_norm,
                 config_.dropout, ctx);
  }
  return x;
}

void EncoderStack::collect(const std::string& prefix, ParameterList& out) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const std::string p = prefix + ".layer" + std::to_string(i);
    layers_[i].self_attention.collect(p + ".self_attention", out);
    layers_[i].attention_norm.collect(p + ".attention_norm", out);
    layers_[i].feed_forward.collect(p + ".feed_forward", out);
    layers_[i].feed_forward_norm.collect(p + ".feed_forward_norm", out);
  }
}

DecoderStack::DecoderStack(const TransformerConfig& config, std::mt19937_64& rng) : config_(config) {
  config_.validate();
  for (std::size_t i = 0; i < config_.num_layers; ++i) {
    DecoderLayer layer;
    layer.self_attention = MultiHeadAttention::init(config_.model_dim, config_.num_heads, rng);
    layer.self_attention_norm = LayerNorm::init(config_.model_dim);
    layer.cross_attention = MultiHeadAttention::init(config_.model_dim, config_.num_heads, rng);
    layer.cross_attention_norm = LayerNorm::init(config_.model_dim);
    layer.feed_forward = FeedForward::init(config_.model_dim, config_.ffn_dim, rng);
    layer.feed_forward_norm = LayerNorm::init(config_.model_dim);
    layers_.push_back(std::move(layer));
  }
}

Tensor DecoderStack::forward(const Tensor& input, ops::Lengths target_lengths, const Tensor& memory,
                             ops::Lengths memory_lengths, const ForwardContext& ctx) const {
  DUALSPEECH_EXPECT(input.rank() == 3 && input.dim(2) == config_.model_dim,
                    "decode: input must be [batch, time, model_dim]");
  DUALSPEECH_EXPECT(input.dim(1) >= 1, "decode: empty prefix");
  DUALSPEECH_EXPECT(input.dim(1) <= config_.max_seq_len, "decode: sequence longer than max_seq_len");
  DUALSPEECH_EXPECT(memory.rank() == 3 && memory.dim(0) == input.dim(0),
                    "decode: memory batch mismatch");
  const AttentionMask self_mask = AttentionMask::combined({target_lengths.begin(), target_lengths.end()});
  const AttentionMask cross_mask = AttentionMask::padding({memory_lengths.begin(), memory_lengths.end()});
  Tensor x = input;
  for (const DecoderLayer& layer : layers_) {
    x = residual(x, multi_head_attention(x, x, x, self_mask, layer.self_attention),
                 layer.self_attention_norm, config_.dropout, ctx);
    x = residual(x, multi_head_attention(x, memory, memory, cross_mask, layer.cross_attention),
                 layer.cross_attention_norm, config_.dropout, ctx);
    x = residual(x, layer.feed_forward(x, config_.dropout, ctx), layer.feed_forward_norm,
                 config_.dropout, ctx);
  }
  return x;
}

DecoderCache DecoderStack::start(const Tensor& memory, ops::Lengths memory_lengths) const {
  NoGradGuard no_grad;
  DecoderCache cache;
  cache.batch = memory.dim(0);
  cache.memory_lengths.assign(memory_lengths.begin(), memory_lengths.end());
  for (const DecoderLayer& layer : layers_) {
    cache.cross_keys.push_back(layer.cross_attention.key(memory));
    cache.cross_values.push_back(layer.cross_attention.value(memory));
  }
  cache.self_keys.resize(layers_.size());
  cache.self_values.resize(layers_.size());
  return cache;
}

namespace {

// Append one [b, 1, d] row per batch entry to a [b, t, d] buffer.
std::vector<double> append_time(const std::vector<double>& buffer, std::size_t batch,
                                std::size_t length, std::size_t width, std::span<const double> row) {
  std::vector<double> out(batch * (length + 1) * width);
  for (std::size_t b = 0; b < batch; ++b) {
    std::copy_n(buffer.data() + b * length * width, length * width,
                out.data() + b * (length + 1) * width);
    std::copy_n(row.data() + b * width, width, out.data() + (b * (length + 1) + length) * width);
  }
  return out;
}

}  // namespace

Tensor DecoderStack::step(DecoderCache& cache, const Tensor& input) const {
  NoGradGuard no_grad;
  DUALSPEECH_EXPECT(input.rank() == 3 && input.dim(0) == cache.batch && input.dim(1) == 1 &&
                        input.dim(2) == config_.model_dim,
                    "decoder step: input must be [batch, 1, model_dim]");
  DUALSPEECH_EXPECT(cache.length + 1 <= config_.max_seq_len, "decoder step: exceeded max_seq_len");
  const std::size_t width = config_.model_dim;
  const std::size_t t = cache.length;
  const std::vector<std::size_t> self_lengths(cache.batch, t + 1);
  const ForwardContext inference;
  Tensor x = input;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const DecoderLayer& layer = layers_[l];
    const MultiHeadAttention& sa = layer.self_attention;
    const Tensor k = sa.key(x), v = sa.value(x);
    cache.self_keys[l] = append_time(cache.self_keys[l], cache.batch, t, width, k.data());
    cache.self_values[l] = append_time(cache.self_values[l], cache.batch, t, width, v.data());
    const Tensor keys = Tensor::from({cache.batch, t + 1, width}, cache.self_keys[l]);
    const Tensor values = Tensor::from({cache.batch, t + 1, width}, cache.self_values[l]);
    const Tensor self_ctx = ops::attention(sa.query(x), keys, values, sa.heads, self_lengths, false);
    x = layer.self_attention_norm(ops::add(x, sa.output(self_ctx)));
    const MultiHeadAttention& ca = layer.cross_attention;
    const Tensor cross_ctx = ops::attention(ca.query(x), cache.cross_keys[l], cache.cross_values[l],
                                            ca.heads, cache.memory_lengths, false);
    x = layer.cross_attention_norm(ops::add(x, ca.output(cross_ctx)));
    x = layer.feed_forward_norm(ops::add(x, layer.feed_forward(x, 0.0, inference)));
  }
  ++cache.length;
  return x;
}

void DecoderStack::collect(const std::string& prefix, ParameterList& out) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const std::string p = prefix + ".layer" + std::to_string(i);
    layers_[i].self_attention.collect(p + ".self_attention", out);
    layers_[i].self_attention_norm.collect(p + ".self_attention_norm", out);
    layers_[i].cross_attention.collect(p + ".cross_attention", out);
    layers_[i].cross_attention_norm.collect(p + ".cross_attention_norm", out);
    layers_[i].feed_forward.collect(p + ".feed_forward", out);
    layers_[i].feed_forward_norm.collect(p + ".feed_forward_norm", out);
  }
}

Tensor decode_step(const DecoderStack& decoder, const Tensor& prefix, const Tensor& memory,
                   ops::Lengths memory_lengths) {
  DUALSPEECH_EXPECT(prefix.rank() == 3 && prefix.dim(1) >= 1, "decode_step: empty prefix");
  const std::size_t batch = prefix.dim(0), time = prefix.dim(1), width = prefix.dim(2);
  const std::vector<std::size_t> lengths(batch, time);
  const Tensor hidden = decoder.forward(prefix, lengths, memory, memory_lengths, ForwardContext{});
  std::vector<double> last(batch * width);
  for (std::size_t b = 0; b < batch; ++b)
    std::copy_n(hidden.data().data() + (b * time + time - 1) * width, width, last.data() + b * width);
  return Tensor::from({batch, 1, width}, std::move(last));
}

}  // namespace dualspeech
