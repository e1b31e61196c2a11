#include <Eigen/Core>
#include <cmath>
#include <limits>

#include "dualspeech/error.hpp"
#include "dualspeech/ops.hpp"

namespace dualspeech::ops {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Strided = Eigen::OuterStride<>;
using ConstHead = Eigen::Map<const RowMatrix, 0, Strided>;
using MutHead = Eigen::Map<RowMatrix, 0, Strided>;
using ConstMap = Eigen::Map<const RowMatrix>;

struct Geometry {
  std::size_t batch, lq, lk, width, heads, head_dim;
  bool causal;
  std::size_t query_offset;

  // Number of visible keys for query row i of batch entry b.
  std::size_t visible(std::size_t key_length, std::size_t i) const {
    if (!causal) return key_length;
    return std::min(key_length, query_offset + i + 1);
  }
};

Geometry check(const Tensor& q, const Tensor& k, const Tensor* v, std::size_t heads,
               Lengths key_lengths, bool causal, std::size_t query_offset) {
  DUALSPEECH_EXPECT(q.rank() == 3 && k.rank() == 3, "attention: expected [b, l, d] inputs");
  DUALSPEECH_EXPECT(q.dim(0) == k.dim(0) && q.dim(2) == k.dim(2), "attention: q/k shape mismatch");
  if (v) DUALSPEECH_EXPECT(v->shape() == k.shape(), "attention: key and value shapes differ");
  DUALSPEECH_EXPECT(heads > 0 && q.dim(2) % heads == 0, "attention: width not divisible by heads");
  DUALSPEECH_EXPECT(key_lengths.size() == q.dim(0), "attention: key_lengths/batch mismatch");
  Geometry g{q.dim(0), q.dim(1), k.dim(1), q.dim(2), heads, q.dim(2) / heads, causal, query_offset};
  for (std::size_t len : key_lengths) {
    DUALSPEECH_EXPECT(len <= g.lk, "attention: key length exceeds key axis");
    DUALSPEECH_EXPECT(g.visible(len, 0) > 0, "attention: fully masked attention row");
  }
  return g;
}

// Row-wise masked softmax of scores in place; masked entries become exactly 0.
void masked_softmax(RowMatrix& scores, const Geometry& g, std::size_t key_length) {
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const auto n = static_cast<Eigen::Index>(g.visible(key_length, static_cast<std::size_t>(i)));
    auto row = scores.row(i);
    const double mx = row.head(n).maxCoeff();
    double total = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) total += row(j) = std::exp(row(j) - mx);
    row.head(n) /= total;
    row.tail(scores.cols() - n).setZero();
  }
}

}  // namespace

std::vector<double> attention_weights(const Tensor& q, const Tensor& k, std::size_t heads,
                                      Lengths key_lengths, bool causal, std::size_t query_offset) {
  const Geometry g = check(q, k, nullptr, heads, key_lengths, causal, query_offset);
  const double scale = 1.0 / std::sqrt(static_cast<double>(g.head_dim));
  std::vector<double> out(g.batch * heads * g.lq * g.lk);
  const auto qd = q.data(), kd = k.data();
  const auto dh = static_cast<Eigen::Index>(g.head_dim);
  const Strided stride(static_cast<Eigen::Index>(g.width));
  for (std::size_t b = 0; b < g.batch; ++b)
    for (std::size_t h = 0; h < heads; ++h) {
      ConstHead qh(qd.data() + b * g.lq * g.width + h * g.head_dim, g.lq, dh, stride);
      ConstHead kh(kd.data() + b * g.lk * g.width + h * g.head_dim, g.lk, dh, stride);
      RowMatrix scores = scale * (qh * kh.transpose());
      masked_softmax(scores, g, key_lengths[b]);
      std::copy_n(scores.data(), g.lq * g.lk, out.data() + (b * heads + h) * g.lq * g.lk);
    }
  return out;
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads,
                 Lengths key_lengths, bool causal, std::size_t query_offset) {
  const Geometry g = check(q, k, &v, heads, key_lengths, causal, query_offset);
  const double scale = 1.0 / std::sqrt(static_cast<double>(g.head_dim));
  const auto dh = static_cast<Eigen::Index>(g.head_dim);
  const Strided stride(static_cast<Eigen::Index>(g.width));
  std::vector<double> out(g.batch * g.lq * g.width);
  std::vector<double> probs(g.batch * heads * g.lq * g.lk);
  const auto qd = q.data(), kd = k.data(), vd = v.data();
  for (std::size_t b = 0; b < g.batch; ++b)
    for (std::size_t h = 0; h < heads; ++h) {
      ConstHead qh(qd.data() + b * g.lq * g.width + h * g.head_dim, g.lq, dh, stride);
      ConstHead kh(kd.data() + b * g.lk * g.width + h * g.head_dim, g.lk, dh, stride);
      ConstHead vh(vd.data() + b * g.lk * g.width + h * g.head_dim, g.lk, dh, stride);
      RowMatrix scores = scale * (qh * kh.transpose());
      masked_softmax(scores, g, key_lengths[b]);
      MutHead oh(out.data() + b * g.lq * g.width + h * g.head_dim, g.lq, dh, stride);
      oh.noalias() = scores * vh;
      std::copy_n(scores.data(), g.lq * g.lk, probs.data() + (b * heads + h) * g.lq * g.lk);
    }
  return make_result(
      "attention", q.shape(), std::move(out), {q, k, v},
      [g, scale, probs = std::move(probs)](detail::Node& self) {
        const auto dh = static_cast<Eigen::Index>(g.head_dim);
        const Strided stride(static_cast<Eigen::Index>(g.width));
        const auto& qd = self.inputs[0]->value;
        const auto& kd = self.inputs[1]->value;
        const auto& vd = self.inputs[2]->value;
        const bool need_q = self.inputs[0]->requires_grad;
        const bool need_k = self.inputs[1]->requires_grad;
        const bool need_v = self.inputs[2]->requires_grad;
        double* gq = need_q ? self.inputs[0]->ensure_grad().data() : nullptr;
        double* gk = need_k ? self.inputs[1]->ensure_grad().data() : nullptr;
        double* gv = need_v ? self.inputs[2]->ensure_grad().data() : nullptr;
        const auto lq = static_cast<Eigen::Index>(g.lq), lk = static_cast<Eigen::Index>(g.lk);
        for (std::size_t b = 0; b < g.batch; ++b)
          for (std::size_t h = 0; h < g.heads; ++h) {
            const std::size_t q_off = b * g.lq * g.width + h * g.head_dim;
            const std::size_t k_off = b * g.lk * g.width + h * g.head_dim;
            ConstMap p(probs.data() + (b * g.heads + h) * g.lq * g.lk, lq, lk);
            ConstHead dout(self.grad.data() + q_off, lq, dh, stride);
            ConstHead vh(vd.data() + k_off, lk, dh, stride);
            if (need_v) MutHead(gv + k_off, lk, dh, stride).noalias() += p.transpose() * dout;
            if (!need_q && !need_k) continue;
            RowMatrix dp = dout * vh.transpose();
            // Softmax backward: ds = p * (dp - rowsum(dp * p)).
            Eigen::VectorXd dots = (dp.array() * p.array()).rowwise().sum();
            RowMatrix ds = (p.array() * (dp.array().colwise() - dots.array())).matrix() * scale;
            if (need_q)
              MutHead(gq + q_off, lq, dh, stride).noalias() +=
                  ds * ConstHead(kd.data() + k_off, lk, dh, stride);
            if (need_k)
              MutHead(gk + k_off, lk, dh, stride).noalias() +=
                  ds.transpose() * ConstHead(qd.data() + q_off, lq, dh, stride);
          }
      });
}

}  // namespace dualspeech::ops
