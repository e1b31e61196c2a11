#include "dualspeech/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "dualspeech/error.hpp"

namespace dualspeech::ops {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

std::vector<double>& grad_of(detail::Node& self, std::size_t input) {
  return self.inputs[input]->ensure_grad();
}

bool wants_grad(const detail::Node& self, std::size_t input) {
  return self.inputs[input]->requires_grad;
}

void expect_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  DUALSPEECH_EXPECT(a.shape() == b.shape(), std::string(op) + ": shape mismatch " +
                                                shape_string(a.shape()) + " vs " +
                                                shape_string(b.shape()));
}

void expect_sequence(const Tensor& x, Lengths lengths, const char* op) {
  DUALSPEECH_EXPECT(x.rank() == 3, std::string(op) + ": expected [batch, time, channels]");
  DUALSPEECH_EXPECT(lengths.size() == x.dim(0), std::string(op) + ": lengths/batch mismatch");
  for (std::size_t len : lengths)
    DUALSPEECH_EXPECT(len <= x.dim(1), std::string(op) + ": length exceeds time axis");
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  expect_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  const auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return make_result("add", a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (!wants_grad(self, k)) continue;
      auto& g = grad_of(self, k);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  expect_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  const auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return make_result("sub", a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    if (wants_grad(self, 0)) {
      auto& g = grad_of(self, 0);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (wants_grad(self, 1)) {
      auto& g = grad_of(self, 1);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  expect_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  const auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return make_result("mul", a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    const auto& x = self.inputs[0]->value;
    const auto& y = self.inputs[1]->value;
    if (wants_grad(self, 0)) {
      auto& g = grad_of(self, 0);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * y[i];
    }
    if (wants_grad(self, 1)) {
      auto& g = grad_of(self, 1);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * x[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.size());
  const auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factor;
  return make_result("scale", a.shape(), std::move(out), {a}, [factor](detail::Node& self) {
    auto& g = grad_of(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  DUALSPEECH_EXPECT(bias.rank() == 1 && x.shape().back() == bias.dim(0),
                    "add_bias: bias width must equal the last axis of x");
  const std::size_t n = bias.dim(0);
  std::vector<double> out(x.data().begin(), x.data().end());
  const auto b = bias.data();
  for (std::size_t i = 0; i < out.size(); i += n)
    for (std::size_t j = 0; j < n; ++j) out[i + j] += b[j];
  return make_result("add_bias", x.shape(), std::move(out), {x, bias}, [n](detail::Node& self) {
    if (wants_grad(self, 0)) {
      auto& g = grad_of(self, 0);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (wants_grad(self, 1)) {
      auto& g = grad_of(self, 1);
      for (std::size_t i = 0; i < self.grad.size(); i += n)
        for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i + j];
    }
  });
}

Tensor add_time_rows(const Tensor& x, const Tensor& rows, std::size_t row_offset) {
  DUALSPEECH_EXPECT(x.rank() == 3 && rows.rank() == 2, "add_time_rows: expected [b,t,d] and [r,d]");
  const std::size_t batch = x.dim(0), time = x.dim(1), d = x.dim(2);
  DUALSPEECH_EXPECT(rows.dim(1) == d, "add_time_rows: width mismatch");
  DUALSPEECH_EXPECT(row_offset + time <= rows.dim(0), "add_time_rows: not enough rows");
  std::vector<double> out(x.data().begin(), x.data().end());
  const auto r = rows.data();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < time; ++t) {
      double* o = out.data() + (b * time + t) * d;
      const double* p = r.data() + (row_offset + t) * d;
      for (std::size_t j = 0; j < d; ++j) o[j] += p[j];
    }
  return make_result(
      "add_time_rows", x.shape(), std::move(out), {x, rows},
      [batch, time, d, row_offset](detail::Node& self) {
        if (wants_grad(self, 0)) {
          auto& g = grad_of(self, 0);
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (wants_grad(self, 1)) {
          auto& g = grad_of(self, 1);
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t t = 0; t < time; ++t)
              for (std::size_t j = 0; j < d; ++j)
                g[(row_offset + t) * d + j] += self.grad[(b * time + t) * d + j];
        }
      });
}

Tensor matmul(const Tensor& x, const Tensor& w) {
  DUALSPEECH_EXPECT(w.rank() == 2, "matmul: weight must be rank 2");
  const std::size_t k = w.dim(0), n = w.dim(1);
  DUALSPEECH_EXPECT(x.shape().back() == k, "matmul: inner dimensions differ (" +
                                               shape_string(x.shape()) + " x " +
                                               shape_string(w.shape()) + ")");
  const std::size_t m = x.size() / k;
  std::vector<double> out(m * n);
  MutMap(out.data(), m, n).noalias() = ConstMap(x.data().data(), m, k) * ConstMap(w.data().data(), k, n);
  Shape shape = x.shape();
  shape.back() = n;
  return make_result("matmul", std::move(shape), std::move(out), {x, w}, [m, k, n](detail::Node& self) {
    ConstMap dy(self.grad.data(), m, n);
    if (wants_grad(self, 0)) {
      MutMap(grad_of(self, 0).data(), m, k).noalias() +=
          dy * ConstMap(self.inputs[1]->value.data(), k, n).transpose();
    }
    if (wants_grad(self, 1)) {
      MutMap(grad_of(self, 1).data(), k, n).noalias() +=
          ConstMap(self.inputs[0]->value.data(), m, k).transpose() * dy;
    }
  });
}

Tensor matmul_transposed(const Tensor& x, const Tensor& w) {
  DUALSPEECH_EXPECT(w.rank() == 2, "matmul_transposed: weight must be rank 2");
  const std::size_t n = w.dim(0), k = w.dim(1);
  DUALSPEECH_EXPECT(x.shape().back() == k, "matmul_transposed: inner dimensions differ");
  const std::size_t m = x.size() / k;
  std::vector<double> out(m * n);
  MutMap(out.data(), m, n).noalias() =
      ConstMap(x.data().data(), m, k) * ConstMap(w.data().data(), n, k).transpose();
  Shape shape = x.shape();
  shape.back() = n;
  return make_result("matmul_transposed", std::move(shape), std::move(out), {x, w},
                     [m, k, n](detail::Node& self) {
                       ConstMap dy(self.grad.data(), m, n);
                       if (wants_grad(self, 0)) {
                         MutMap(grad_of(self, 0).data(), m, k).noalias() +=
                             dy * ConstMap(self.inputs[1]->value.data(), n, k);
                       }
                       if (wants_grad(self, 1)) {
                         MutMap(grad_of(self, 1).data(), n, k).noalias() +=
                             dy.transpose() * ConstMap(self.inputs[0]->value.data(), m, k);
                       }
                     });
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.size());
  const auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
  return make_result("relu", x.shape(), std::move(out), {x}, [](detail::Node& self) {
    auto& g = grad_of(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (self.value[i] > 0.0) g[i] += self.grad[i];
  });
}

Tensor tanh(const Tensor& x) {
  std::vector<double> out(x.size());
  const auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(in[i]);
  return make_result("tanh", x.shape(), std::move(out), {x}, [](detail::Node& self) {
    auto& g = grad_of(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i)
      g[i] += self.grad[i] * (1.0 - self.value[i] * self.value[i]);
  });
}

Tensor sigmoid(const Tensor& x) {
  std::vector<double> out(x.size());
  const auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    // Branch on sign so exp never overflows.
    if (in[i] >= 0.0) {
      out[i] = 1.0 / (1.0 + std::exp(-in[i]));
    } else {
      const double e = std::exp(in[i]);
      out[i] = e / (1.0 + e);
    }
  }
  return make_result("sigmoid", x.shape(), std::move(out), {x}, [](detail::Node& self) {
    auto& g = grad_of(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i)
      g[i] += self.grad[i] * self.value[i] * (1.0 - self.value[i]);
  });
}

Tensor softmax(const Tensor& x) {
  const std::size_t n = x.shape().back();
  std::vector<double> out(x.size());
  const auto in = x.data();
  for (std::size_t r = 0; r < out.size(); r += n) {
    const double mx = *std::max_element(in.begin() + r, in.begin() + r + n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) total += out[r + j] = std::exp(in[r + j] - mx);
    for (std::size_t j = 0; j < n; ++j) out[r + j] /= total;
  }
  return make_result("softmax", x.shape(), std::move(out), {x}, [n](detail::Node& self) {
    auto& g = grad_of(self, 0);
    const auto& y = self.value;
    for (std::size_t r = 0; r < y.size(); r += n) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += self.grad[r + j] * y[r + j];
      for (std::size_t j = 0; j < n; ++j) g[r + j] += y[r + j] * (self.grad[r + j] - dot);
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double epsilon) {
  const std::size_t n = x.shape().back();
  DUALSPEECH_EXPECT(gain.rank() == 1 && gain.dim(0) == n && bias.rank() == 1 && bias.dim(0) == n,
                    "layer_norm: gain/bias width must equal the last axis");
  const std::size_t rows = x.size() / n;
  std::vector<double> out(x.size());
  std::vector<double> normalized(x.size());
  std::vector<double> inv_std(rows);
  const auto in = x.data();
  const auto gm = gain.data(), bt = bias.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = in.data() + r * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += row[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + epsilon);
    for (std::size_t j = 0; j < n; ++j) {
      const double xh = (row[j] - mu) * inv_std[r];
      normalized[r * n + j] = xh;
      out[r * n + j] = xh * gm[j] + bt[j];
    }
  }
  return make_result(
      "layer_norm", x.shape(), std::move(out), {x, gain, bias},
      [n, rows, normalized = std::move(normalized), inv_std = std::move(inv_std)](detail::Node& self) {
        const auto& gm = self.inputs[1]->value;
        if (wants_grad(self, 1)) {
          auto& g = grad_of(self, 1);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[r * n + j] * normalized[r * n + j];
        }
        if (wants_grad(self, 2)) {
          auto& g = grad_of(self, 2);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[r * n + j];
        }
        if (wants_grad(self, 0)) {
          auto& g = grad_of(self, 0);
          const double inv_n = 1.0 / static_cast<double>(n);
          for (std::size_t r = 0; r < rows; ++r) {
            double sum_dxh = 0.0, sum_dxh_xh = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              const double dxh = self.grad[r * n + j] * gm[j];
              sum_dxh += dxh;
              sum_dxh_xh += dxh * normalized[r * n + j];
            }
            for (std::size_t j = 0; j < n; ++j) {
              const double dxh = self.grad[r * n + j] * gm[j];
              g[r * n + j] += inv_std[r] * (dxh - inv_n * sum_dxh -
                                            normalized[r * n + j] * inv_n * sum_dxh_xh);
            }
          }
        }
      });
}

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias) {
  DUALSPEECH_EXPECT(x.rank() == 3 && w.rank() == 3, "conv1d: expected x[b,t,cin], w[k,cin,cout]");
  const std::size_t batch = x.dim(0), time = x.dim(1), cin = x.dim(2);
  const std::size_t kernel = w.dim(0), cout = w.dim(2);
  DUALSPEECH_EXPECT(w.dim(1) == cin, "conv1d: input channel mismatch");
  DUALSPEECH_EXPECT(kernel % 2 == 1, "conv1d: kernel size must be odd");
  DUALSPEECH_EXPECT(bias.rank() == 1 && bias.dim(0) == cout, "conv1d: bias width mismatch");
  const std::size_t half = kernel / 2;
  const std::size_t rows = batch * time, cols = kernel * cin;
  // im2col: row (b, t) holds x[b, t - half + j, :] for j in [0, kernel).
  std::vector<double> patches(rows * cols, 0.0);
  const auto in = x.data();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < time; ++t)
      for (std::size_t j = 0; j < kernel; ++j) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + j) - static_cast<std::ptrdiff_t>(half);
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(time)) continue;
        std::copy_n(in.data() + (b * time + static_cast<std::size_t>(src)) * cin, cin,
                    patches.data() + (b * time + t) * cols + j * cin);
      }
  std::vector<double> out(rows * cout);
  MutMap y(out.data(), rows, cout);
  y.noalias() = ConstMap(patches.data(), rows, cols) * ConstMap(w.data().data(), cols, cout);
  const auto bv = bias.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cout; ++c) out[r * cout + c] += bv[c];
  return make_result(
      "conv1d", {batch, time, cout}, std::move(out), {x, w, bias},
      [=, patches = std::move(patches)](detail::Node& self) {
        ConstMap dy(self.grad.data(), rows, cout);
        if (wants_grad(self, 1)) {
          MutMap(grad_of(self, 1).data(), cols, cout).noalias() +=
              ConstMap(patches.data(), rows, cols).transpose() * dy;
        }
        if (wants_grad(self, 2)) {
          auto& g = grad_of(self, 2);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cout; ++c) g[c] += self.grad[r * cout + c];
        }
        if (wants_grad(self, 0)) {
          RowMatrix dpatches = dy * ConstMap(self.inputs[1]->value.data(), cols, cout).transpose();
          auto& g = grad_of(self, 0);
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t t = 0; t < time; ++t)
              for (std::size_t j = 0; j < kernel; ++j) {
                const std::ptrdiff_t src =
                    static_cast<std::ptrdiff_t>(t + j) - static_cast<std::ptrdiff_t>(half);
                if (src < 0 || src >= static_cast<std::ptrdiff_t>(time)) continue;
                const double* d = dpatches.data() + (b * time + t) * cols + j * cin;
                double* dst = g.data() + (b * time + static_cast<std::size_t>(src)) * cin;
                for (std::size_t c = 0; c < cin; ++c) dst[c] += d[c];
              }
        }
      });
}

Tensor embedding(const Tensor& table, std::span<const std::int32_t> ids, std::size_t batch,
                 std::size_t time) {
  DUALSPEECH_EXPECT(table.rank() == 2, "embedding: table must be rank 2");
  DUALSPEECH_EXPECT(ids.size() == batch * time, "embedding: ids size must be batch*time");
  const std::size_t vocab = table.dim(0), d = table.dim(1);
  std::vector<std::int32_t> saved(ids.begin(), ids.end());
  for (std::int32_t id : saved)
    DUALSPEECH_EXPECT(id == kZeroRow || (id >= 0 && static_cast<std::size_t>(id) < vocab),
                      "embedding: id out of range");
  std::vector<double> out(batch * time * d, 0.0);
  const auto tv = table.data();
  for (std::size_t i = 0; i < saved.size(); ++i)
    if (saved[i] >= 0)
      std::copy_n(tv.data() + static_cast<std::size_t>(saved[i]) * d, d, out.data() + i * d);
  return make_result("embedding", {batch, time, d}, std::move(out), {table},
                     [d, saved = std::move(saved)](detail::Node& self) {
                       auto& g = grad_of(self, 0);
                       for (std::size_t i = 0; i < saved.size(); ++i) {
                         if (saved[i] < 0) continue;
                         double* dst = g.data() + static_cast<std::size_t>(saved[i]) * d;
                         const double* src = self.grad.data() + i * d;
                         for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
                       }
                     });
}

Tensor shift_right(const Tensor& x, const Tensor& start) {
  DUALSPEECH_EXPECT(x.rank() == 3, "shift_right: expected [b,t,d]");
  const std::size_t batch = x.dim(0), time = x.dim(1), d = x.dim(2);
  const bool has_start = start.defined();
  if (has_start) DUALSPEECH_EXPECT(start.size() == d, "shift_right: start width mismatch");
  std::vector<double> out(x.size(), 0.0);
  const auto in = x.data();
  for (std::size_t b = 0; b < batch; ++b) {
    double* row0 = out.data() + b * time * d;
    if (has_start) std::copy_n(start.data().data(), d, row0);
    if (time > 1) std::copy_n(in.data() + b * time * d, (time - 1) * d, row0 + d);
  }
  std::vector<Tensor> inputs{x};
  if (has_start) inputs.push_back(start);
  return make_result("shift_right", x.shape(), std::move(out), std::move(inputs),
                     [batch, time, d](detail::Node& self) {
                       if (wants_grad(self, 0)) {
                         auto& g = grad_of(self, 0);
                         for (std::size_t b = 0; b < batch; ++b)
                           for (std::size_t i = 0; i + 1 < time; ++i)
                             for (std::size_t j = 0; j < d; ++j)
                               g[(b * time + i) * d + j] += self.grad[(b * time + i + 1) * d + j];
                       }
                       if (self.inputs.size() > 1 && wants_grad(self, 1)) {
                         auto& g = grad_of(self, 1);
                         for (std::size_t b = 0; b < batch; ++b)
                           for (std::size_t j = 0; j < d; ++j) g[j] += self.grad[b * time * d + j];
                       }
                     });
}

Tensor mask_time(const Tensor& x, Lengths lengths) {
  expect_sequence(x, lengths, "mask_time");
  const std::size_t batch = x.dim(0), time = x.dim(1), c = x.dim(2);
  std::vector<double> keep(batch * time, 0.0);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < lengths[b]; ++t) keep[b * time + t] = 1.0;
  std::vector<double> out(x.data().begin(), x.data().end());
  for (std::size_t r = 0; r < batch * time; ++r)
    if (keep[r] == 0.0) std::fill_n(out.data() + r * c, c, 0.0);
  return make_result("mask_time", x.shape(), std::move(out), {x},
                     [c, keep = std::move(keep)](detail::Node& self) {
                       auto& g = grad_of(self, 0);
                       for (std::size_t r = 0; r < keep.size(); ++r)
                         if (keep[r] != 0.0)
                           for (std::size_t j = 0; j < c; ++j) g[r * c + j] += self.grad[r * c + j];
                     });
}

Tensor dropout(const Tensor& x, double rate, std::mt19937_64& rng) {
  DUALSPEECH_EXPECT(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0, 1)");
  if (rate == 0.0) return x;
  std::bernoulli_distribution keep(1.0 - rate);
  const double factor = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.size());
  for (double& m : mask) m = keep(rng) ? factor : 0.0;
  std::vector<double> out(x.size());
  const auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[i] * mask[i];
  return make_result("dropout", x.shape(), std::move(out), {x},
                     [mask = std::move(mask)](detail::Node& self) {
                       auto& g = grad_of(self, 0);
                       for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * mask[i];
                     });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return make_result("sum", {1}, {total}, {x}, [](detail::Node& self) {
    auto& g = grad_of(self, 0);
    for (double& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

Tensor mse_masked(const Tensor& pred, const Tensor& target, Lengths lengths) {
  expect_same_shape(pred, target, "mse_masked");
  expect_sequence(pred, lengths, "mse_masked");
  const std::size_t time = pred.dim(1), c = pred.dim(2);
  std::size_t valid = 0;
  for (std::size_t len : lengths) valid += len;
  DUALSPEECH_EXPECT(valid > 0, "mse_masked: every position is padding");
  const double norm = 1.0 / static_cast<double>(valid * c);
  const auto p = pred.data(), t = target.data();
  double total = 0.0;
  for (std::size_t b = 0; b < lengths.size(); ++b)
    for (std::size_t i = 0; i < lengths[b] * c; ++i) {
      const std::size_t k = b * time * c + i;
      total += (p[k] - t[k]) * (p[k] - t[k]);
    }
  std::vector<std::size_t> lens(lengths.begin(), lengths.end());
  return make_result("mse_masked", {1}, {total * norm}, {pred, target},
                     [time, c, norm, lens = std::move(lens)](detail::Node& self) {
                       const auto& p = self.inputs[0]->value;
                       const auto& t = self.inputs[1]->value;
                       const double s = 2.0 * norm * self.grad[0];
                       for (std::size_t k = 0; k < 2; ++k) {
                         if (!wants_grad(self, k)) continue;
                         auto& g = grad_of(self, k);
                         const double sign = k == 0 ? 1.0 : -1.0;
                         for (std::size_t b = 0; b < lens.size(); ++b)
                           for (std::size_t i = 0; i < lens[b] * c; ++i) {
                             const std::size_t idx = b * time * c + i;
                             g[idx] += sign * s * (p[idx] - t[idx]);
                           }
                       }
                     });
}

Tensor nll_masked(const Tensor& logits, std::span<const std::int32_t> targets, Lengths lengths) {
  expect_sequence(logits, lengths, "nll_masked");
  const std::size_t batch = logits.dim(0), time = logits.dim(1), vocab = logits.dim(2);
  DUALSPEECH_EXPECT(targets.size() == batch * time, "nll_masked: targets size must be batch*time");
  std::size_t valid = 0;
  for (std::size_t len : lengths) valid += len;
  DUALSPEECH_EXPECT(valid > 0, "nll_masked: every position is padding");
  const double norm = 1.0 / static_cast<double>(valid);
  const auto z = logits.data();
  std::vector<double> probs(logits.size(), 0.0);
  std::vector<std::int32_t> tgt(targets.begin(), targets.end());
  std::vector<std::size_t> lens(lengths.begin(), lengths.end());
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < lens[b]; ++t) {
      const std::size_t r = (b * time + t) * vocab;
      const std::int32_t y = tgt[b * time + t];
      DUALSPEECH_EXPECT(y >= 0 && static_cast<std::size_t>(y) < vocab, "nll_masked: target out of range");
      const double mx = *std::max_element(z.begin() + r, z.begin() + r + vocab);
      double denom = 0.0;
      for (std::size_t j = 0; j < vocab; ++j) denom += probs[r + j] = std::exp(z[r + j] - mx);
      for (std::size_t j = 0; j < vocab; ++j) probs[r + j] /= denom;
      total += -(z[r + y] - mx - std::log(denom));
    }
  return make_result("nll_masked", {1}, {total * norm}, {logits},
                     [time, vocab, norm, probs = std::move(probs), tgt = std::move(tgt),
                      lens = std::move(lens)](detail::Node& self) {
                       auto& g = grad_of(self, 0);
                       const double s = norm * self.grad[0];
                       for (std::size_t b = 0; b < lens.size(); ++b)
                         for (std::size_t t = 0; t < lens[b]; ++t) {
                           const std::size_t r = (b * time + t) * vocab;
                           for (std::size_t j = 0; j < vocab; ++j) g[r + j] += s * probs[r + j];
                           g[r + static_cast<std::size_t>(tgt[b * time + t])] -= s;
                         }
                     });
}

Tensor bce_masked(const Tensor& prob, std::span<const double> targets, Lengths lengths,
                  double positive_weight) {
  expect_sequence(prob, lengths, "bce_masked");
  DUALSPEECH_EXPECT(prob.dim(2) == 1, "bce_masked: expected [b, t, 1] probabilities");
  DUALSPEECH_EXPECT(targets.size() == prob.size(), "bce_masked: targets size mismatch");
  const std::size_t time = prob.dim(1);
  std::size_t valid = 0;
  for (std::size_t len : lengths) valid += len;
  DUALSPEECH_EXPECT(valid > 0, "bce_masked: every position is padding");
  static constexpr double kTiny = 1e-12;
  const double norm = 1.0 / static_cast<double>(valid);
  const auto p = prob.data();
  double total = 0.0;
  for (std::size_t b = 0; b < lengths.size(); ++b)
    for (std::size_t t = 0; t < lengths[b]; ++t) {
      const std::size_t k = b * time + t;
      const double y = targets[k];
      if (y != 0.0) total -= positive_weight * y * std::log(std::max(p[k], kTiny));
      if (y != 1.0) total -= (1.0 - y) * std::log(std::max(1.0 - p[k], kTiny));
    }
  std::vector<double> tgt(targets.begin(), targets.end());
  std::vector<std::size_t> lens(lengths.begin(), lengths.end());
  return make_result("bce_masked", {1}, {total * norm}, {prob},
                     [time, norm, positive_weight, tgt = std::move(tgt),
                      lens = std::move(lens)](detail::Node& self) {
                       auto& g = grad_of(self, 0);
                       const auto& p = self.inputs[0]->value;
                       const double s = norm * self.grad[0];
                       for (std::size_t b = 0; b < lens.size(); ++b)
                         for (std::size_t t = 0; t < lens[b]; ++t) {
                           const std::size_t k = b * time + t;
                           const double y = tgt[k];
                           double d = 0.0;
                           if (y != 0.0) d -= positive_weight * y / std::max(p[k], kTiny);
                           if (y != 1.0) d += (1.0 - y) / std::max(1.0 - p[k], kTiny);
                           g[k] += s * d;
                         }
                     });
}

}  // namespace dualspeech::ops
