#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "dualspeech/tensor.hpp"

// Differentiable kernels. Sequence tensors are laid out [batch, time, channels]
// row-major; `lengths` gives the number of valid leading time steps per batch
// entry, everything after is padding.
namespace dualspeech::ops {

using Lengths = std::span<const std::size_t>;

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

/// x[..., n] + bias[n]
Tensor add_bias(const Tensor& x, const Tensor& bias);
/// x[b, t, :] + rows[t, :], for rows with at least x.dim(1) rows.
Tensor add_time_rows(const Tensor& x, const Tensor& rows, std::size_t row_offset = 0);

/// x[..., k] · w[k, n]
Tensor matmul(const Tensor& x, const Tensor& w);
/// x[..., k] · w[n, k]^T
Tensor matmul_transposed(const Tensor& x, const Tensor& w);

Tensor relu(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
/// Softmax over the last axis, max-subtracted.
Tensor softmax(const Tensor& x);

/// Normalizes over the last axis, then gain/bias of that width.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double epsilon = 1e-8);

/// 'Same'-padded 1-D convolution along time: x[b, t, cin], w[k, cin, cout]
/// (odd k), bias[cout] -> [b, t, cout].
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias);

/// Rows of table[v, d] gathered by id into [batch, time, d]. Negative ids
/// produce zero rows that receive no gradient.
inline constexpr std::int32_t kZeroRow = -1;
Tensor embedding(const Tensor& table, std::span<const std::int32_t> ids, std::size_t batch,
                 std::size_t time);

/// out[b, 0] = start (or zeros when start is undefined), out[b, t] = x[b, t-1].
Tensor shift_right(const Tensor& x, const Tensor& start);

/// Zeroes time steps at or beyond each batch entry's length.
Tensor mask_time(const Tensor& x, Lengths lengths);

/// Inverted dropout with a mask drawn from rng.
Tensor dropout(const Tensor& x, double rate, std::mt19937_64& rng);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// Mean over valid frames and channels of (pred - target)^2.
Tensor mse_masked(const Tensor& pred, const Tensor& target, Lengths lengths);

/// Mean over valid positions of -log softmax(logits)[target]; logits [b, t, v].
Tensor nll_masked(const Tensor& logits, std::span<const std::int32_t> targets, Lengths lengths);

/// Mean over valid frames of -(w·t·log p + (1-t)·log(1-p)); prob [b, t, 1].
Tensor bce_masked(const Tensor& prob, std::span<const double> targets, Lengths lengths,
                  double positive_weight);

/// Fused multi-head scaled dot-product attention over projected q/k/v.
/// q [b, lq, d], k/v [b, lk, d]. Key j is visible to query i when
/// j < key_lengths[b] and, if causal, j <= query_offset + i.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads,
                 Lengths key_lengths, bool causal, std::size_t query_offset = 0);

/// Attention weights [b, heads, lq, lk] for inspection; not differentiable.
std::vector<double> attention_weights(const Tensor& q, const Tensor& k, std::size_t heads,
                                      Lengths key_lengths, bool causal,
                                      std::size_t query_offset = 0);

}  // namespace dualspeech::ops
