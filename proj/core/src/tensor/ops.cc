// Copyright 2026 The Hapchunk Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "hapchunk/tensor/ops.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include <Eigen/Core>

#include "hapchunk/error.h"

namespace hapchunk::tensor {
namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using StridedMap = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
using ConstStridedMap = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

[[noreturn]] void DimensionError(const std::string& what, const Tensor& a,
                                 const Tensor& b) {
  throw Error(ErrorCode::kDimension, what + ": shapes " +
                                         ShapeString(a.shape()) + " and " +
                                         ShapeString(b.shape()));
}

void RequireSameShape(const std::string& what, const Tensor& a,
                      const Tensor& b) {
  if (a.shape() != b.shape()) DimensionError(what, a, b);
}

// Matrix view dimensions: [prod(leading) x last].
std::size_t MatRows(const Tensor& t) { return t.size() / t.cols(); }

ConstMatMap AsMat(std::span<const double> s, std::size_t rows,
                  std::size_t cols) {
  return ConstMatMap(s.data(), static_cast<Eigen::Index>(rows),
                     static_cast<Eigen::Index>(cols));
}

MatMap AsMat(std::span<double> s, std::size_t rows, std::size_t cols) {
  return MatMap(s.data(), static_cast<Eigen::Index>(rows),
                static_cast<Eigen::Index>(cols));
}

// Applies y = f(x) elementwise with dy/dx = df(x, y).
template <typename F, typename DF>
Tensor Unary(Tape& tape, const Tensor& x, F f, DF df) {
  Tensor out = tape.MakeOutput(x.shape(), {&x});
  auto xd = x.data();
  auto yd = out.data();
  for (std::size_t i = 0; i < xd.size(); ++i) yd[i] = f(xd[i]);
  tape.Record(out, [x, out, df]() mutable {
    auto gx = GradAccess::Sink(x);
    if (gx.empty()) return;
    auto gy = GradAccess::Incoming(out);
    auto xd = x.data();
    auto yd = out.data();
    for (std::size_t i = 0; i < gx.size(); ++i) {
      gx[i] += gy[i] * df(xd[i], yd[i]);
    }
  });
  return out;
}

}  // namespace

Tensor MatMul(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
    DimensionError("matmul", a, b);
  }
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  Tensor out = tape.MakeOutput({m, n}, {&a, &b});
  AsMat(out.data(), m, n).noalias() =
      AsMat(a.data(), m, k) * AsMat(b.data(), k, n);
  tape.Record(out, [a, b, out, m, k, n]() mutable {
    auto dc = AsMat(GradAccess::Incoming(out), m, n);
    if (auto ga = GradAccess::Sink(a); !ga.empty()) {
      AsMat(ga, m, k).noalias() += dc * AsMat(b.data(), k, n).transpose();
    }
    if (auto gb = GradAccess::Sink(b); !gb.empty()) {
      AsMat(gb, k, n).noalias() += AsMat(a.data(), m, k).transpose() * dc;
    }
  });
  return out;
}

Tensor Add(Tape& tape, const Tensor& a, const Tensor& b) {
  RequireSameShape("add", a, b);
  Tensor out = tape.MakeOutput(a.shape(), {&a, &b});
  auto ad = a.data(), bd = b.data();
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] + bd[i];
  tape.Record(out, [a, b, out]() mutable {
    auto g = GradAccess::Incoming(out);
    for (const Tensor* t : {&a, &b}) {
      auto gt = GradAccess::Sink(*t);
      for (std::size_t i = 0; i < gt.size(); ++i) gt[i] += g[i];
    }
  });
  return out;
}

Tensor Sub(Tape& tape, const Tensor& a, const Tensor& b) {
  RequireSameShape("sub", a, b);
  Tensor out = tape.MakeOutput(a.shape(), {&a, &b});
  auto ad = a.data(), bd = b.data();
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] - bd[i];
  tape.Record(out, [a, b, out]() mutable {
    auto g = GradAccess::Incoming(out);
    auto ga = GradAccess::Sink(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
    auto gb = GradAccess::Sink(b);
    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
  });
  return out;
}

Tensor Mul(Tape& tape, const Tensor& a, const Tensor& b) {
  RequireSameShape("mul", a, b);
  Tensor out = tape.MakeOutput(a.shape(), {&a, &b});
  auto ad = a.data(), bd = b.data();
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] * bd[i];
  tape.Record(out, [a, b, out]() mutable {
    auto g = GradAccess::Incoming(out);
    auto ad = a.data(), bd = b.data();
    auto ga = GradAccess::Sink(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * bd[i];
    auto gb = GradAccess::Sink(b);
    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * ad[i];
  });
  return out;
}

Tensor AddBias(Tape& tape, const Tensor& x, const Tensor& bias) {
  if (bias.rank() != 1 || bias.size() != x.cols()) {
    DimensionError("add_bias", x, bias);
  }
  const std::size_t m = MatRows(x), n = x.cols();
  Tensor out = tape.MakeOutput(x.shape(), {&x, &bias});
  AsMat(out.data(), m, n) =
      AsMat(x.data(), m, n).rowwise() +
      ConstVecMap(bias.data().data(), static_cast<Eigen::Index>(n))
          .transpose();
  tape.Record(out, [x, bias, out, m, n]() mutable {
    auto g = AsMat(GradAccess::Incoming(out), m, n);
    if (auto gx = GradAccess::Sink(x); !gx.empty()) AsMat(gx, m, n) += g;
    if (auto gb = GradAccess::Sink(bias); !gb.empty()) {
      VecMap(gb.data(), static_cast<Eigen::Index>(n)) +=
          g.colwise().sum().transpose();
    }
  });
  return out;
}

Tensor Scale(Tape& tape, const Tensor& x, double factor) {
  return Unary(
      tape, x, [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; });
}

Tensor Exp(Tape& tape, const Tensor& x) {
  return Unary(
      tape, x, [](double v) { return std::exp(v); },
      [](double, double y) { return y; });
}

Tensor Gelu(Tape& tape, const Tensor& x) {
  constexpr double kAlpha = 1.702;
  return Unary(
      tape, x,
      [](double v) { return v / (1.0 + std::exp(-kAlpha * v)); },
      [](double v, double) {
        const double s = 1.0 / (1.0 + std::exp(-kAlpha * v));
        return s + kAlpha * v * s * (1.0 - s);
      });
}

Tensor Clamp(Tape& tape, const Tensor& x, double lo, double hi) {
  return Unary(
      tape, x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

Tensor Sum(Tape& tape, const Tensor& x) {
  Tensor out = tape.MakeOutput({}, {&x});
  double s = 0.0;
  for (double v : x.data()) s += v;
  out.data()[0] = s;
  tape.Record(out, [x, out]() mutable {
    const double g = GradAccess::Incoming(out)[0];
    for (double& gx : GradAccess::Sink(x)) gx += g;
  });
  return out;
}

Tensor Softmax(Tape& tape, const Tensor& x, std::size_t axis) {
  if (axis >= std::max<std::size_t>(x.rank(), 1)) {
    throw Error(ErrorCode::kDimension,
                "softmax axis " + std::to_string(axis) + " out of range for " +
                    ShapeString(x.shape()));
  }
  const Shape& s = x.shape();
  const std::size_t n = s.empty() ? 1 : s[axis];
  std::size_t inner = 1;
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t outer = x.size() / (n * inner);
  Tensor out = tape.MakeOutput(s, {&x});
  auto xd = x.data();
  auto yd = out.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, xd[base + j * inner]);
      double z = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double e = std::exp(xd[base + j * inner] - mx);
        yd[base + j * inner] = e;
        z += e;
      }
      for (std::size_t j = 0; j < n; ++j) yd[base + j * inner] /= z;
    }
  }
  tape.Record(out, [x, out, n, inner, outer]() mutable {
    auto gx = GradAccess::Sink(x);
    if (gx.empty()) return;
    auto gy = GradAccess::Incoming(out);
    auto yd = out.data();
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * n * inner + in;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          dot += gy[base + j * inner] * yd[base + j * inner];
        }
        for (std::size_t j = 0; j < n; ++j) {
          const std::size_t idx = base + j * inner;
          gx[idx] += yd[idx] * (gy[idx] - dot);
        }
      }
    }
  });
  return out;
}

Tensor LayerNorm(Tape& tape, const Tensor& x, const Tensor& gain,
                 const Tensor& bias, double eps) {
  const std::size_t n = x.cols();
  if (n < 2) {
    throw Error(ErrorCode::kDimension,
                "layer_norm needs a last dimension >= 2, got " +
                    ShapeString(x.shape()));
  }
  if (gain.size() != n || bias.size() != n) DimensionError("layer_norm", x, gain);
  const std::size_t m = MatRows(x);
  Tensor out = tape.MakeOutput(x.shape(), {&x, &gain, &bias});
  // Normalised rows and inverse std are kept for the backward pass.
  auto xhat = std::make_shared<std::vector<double>>(x.size());
  auto inv_std = std::make_shared<std::vector<double>>(m);
  auto xd = x.data();
  auto yd = out.data();
  auto gd = gain.data(), bd = bias.data();
  for (std::size_t r = 0; r < m; ++r) {
    const double* row = xd.data() + r * n;
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += row[j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t j = 0; j < n; ++j) {
      const double h = (row[j] - mean) * is;
      (*xhat)[r * n + j] = h;
      yd[r * n + j] = h * gd[j] + bd[j];
    }
  }
  tape.Record(out, [x, gain, bias, out, xhat, inv_std, m, n]() mutable {
    auto gy = GradAccess::Incoming(out);
    auto gd = gain.data();
    auto ggain = GradAccess::Sink(gain);
    auto gbias = GradAccess::Sink(bias);
    auto gx = GradAccess::Sink(x);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t r = 0; r < m; ++r) {
      const double* dy = gy.data() + r * n;
      const double* h = xhat->data() + r * n;
      double sum_dh = 0.0, sum_dh_h = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (!ggain.empty()) ggain[j] += dy[j] * h[j];
        if (!gbias.empty()) gbias[j] += dy[j];
        const double dh = dy[j] * gd[j];
        sum_dh += dh;
        sum_dh_h += dh * h[j];
      }
      if (gx.empty()) continue;
      const double is = (*inv_std)[r];
      for (std::size_t j = 0; j < n; ++j) {
        const double dh = dy[j] * gd[j];
        gx[r * n + j] += is * (dh - inv_n * sum_dh - h[j] * inv_n * sum_dh_h);
      }
    }
  });
  return out;
}

Tensor ConcatRows(Tape& tape, const std::vector<Tensor>& parts) {
  if (parts.empty()) {
    throw Error(ErrorCode::kContract, "concat_rows of zero tensors");
  }
  const std::size_t n = parts.front().cols();
  std::size_t m = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != 2 || p.cols() != n) DimensionError("concat_rows", parts.front(), p);
    m += p.rows();
  }
  Tensor out = tape.MakeOutput({m, n}, parts);
  auto od = out.data();
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    std::copy(p.data().begin(), p.data().end(), od.begin() + offset);
    offset += p.size();
  }
  tape.Record(out, [parts, out]() mutable {
    auto g = GradAccess::Incoming(out);
    std::size_t offset = 0;
    for (const Tensor& p : parts) {
      auto gp = GradAccess::Sink(p);
      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[offset + i];
      offset += p.size();
    }
  });
  return out;
}

Tensor GatherRows(Tape& tape, const Tensor& x,
                  std::span<const std::size_t> rows) {
  if (x.rank() != 2) {
    throw Error(ErrorCode::kDimension,
                "gather_rows needs a matrix, got " + ShapeString(x.shape()));
  }
  if (rows.empty()) {
    throw Error(ErrorCode::kDimension, "gather_rows with no rows");
  }
  const std::size_t n = x.cols();
  for (std::size_t r : rows) {
    if (r >= x.rows()) {
      throw Error(ErrorCode::kDimension,
                  "gather_rows index " + std::to_string(r) +
                      " out of range for " + ShapeString(x.shape()));
    }
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  Tensor out = tape.MakeOutput({idx.size(), n}, {&x});
  auto xd = x.data();
  auto od = out.data();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::copy_n(xd.begin() + idx[i] * n, n, od.begin() + i * n);
  }
  tape.Record(out, [x, out, idx = std::move(idx), n]() mutable {
    auto gx = GradAccess::Sink(x);
    if (gx.empty()) return;
    auto g = GradAccess::Incoming(out);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (std::size_t j = 0; j < n; ++j) gx[idx[i] * n + j] += g[i * n + j];
    }
  });
  return out;
}

Tensor TileRows(Tape& tape, const Tensor& x, std::size_t times) {
  if (x.rank() != 2 || times == 0) {
    throw Error(ErrorCode::kDimension,
                "tile_rows needs a matrix and times >= 1, got " +
                    ShapeString(x.shape()));
  }
  const std::size_t block = x.size();
  Tensor out = tape.MakeOutput({x.rows() * times, x.cols()}, {&x});
  auto od = out.data();
  for (std::size_t t = 0; t < times; ++t) {
    std::copy(x.data().begin(), x.data().end(), od.begin() + t * block);
  }
  tape.Record(out, [x, out, times, block]() mutable {
    auto gx = GradAccess::Sink(x);
    if (gx.empty()) return;
    auto g = GradAccess::Incoming(out);
    for (std::size_t t = 0; t < times; ++t) {
      for (std::size_t i = 0; i < block; ++i) gx[i] += g[t * block + i];
    }
  });
  return out;
}

Tensor Reshape(Tape& tape, const Tensor& x, Shape shape) {
  if (NumElements(shape) != x.size()) {
    throw Error(ErrorCode::kDimension, "reshape " + ShapeString(x.shape()) +
                                           " to " + ShapeString(shape));
  }
  Tensor out = tape.MakeOutput(std::move(shape), {&x});
  std::copy(x.data().begin(), x.data().end(), out.data().begin());
  tape.Record(out, [x, out]() mutable {
    auto gx = GradAccess::Sink(x);
    auto g = GradAccess::Incoming(out);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
  });
  return out;
}

Tensor L1Loss(Tape& tape, const Tensor& pred, const Tensor& target) {
  RequireSameShape("l1_loss", pred, target);
  Tensor out = tape.MakeOutput({}, {&pred, &target});
  auto pd = pred.data(), td = target.data();
  double s = 0.0;
  for (std::size_t i = 0; i < pd.size(); ++i) s += std::abs(pd[i] - td[i]);
  const double inv_n = 1.0 / static_cast<double>(pd.size());
  out.data()[0] = s * inv_n;
  tape.Record(out, [pred, target, out, inv_n]() mutable {
    const double g = GradAccess::Incoming(out)[0] * inv_n;
    auto pd = pred.data(), td = target.data();
    auto gp = GradAccess::Sink(pred);
    auto gt = GradAccess::Sink(target);
    for (std::size_t i = 0; i < pd.size(); ++i) {
      const double d = pd[i] - td[i];
      const double sgn = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
      if (!gp.empty()) gp[i] += g * sgn;
      if (!gt.empty()) gt[i] -= g * sgn;
    }
  });
  return out;
}

Tensor KlGaussian(Tape& tape, const Tensor& mu, const Tensor& logvar) {
  RequireSameShape("kl_gaussian", mu, logvar);
  const std::size_t rows = mu.rank() >= 2 ? MatRows(mu) : 1;
  const double inv_rows = 1.0 / static_cast<double>(rows);
  Tensor out = tape.MakeOutput({}, {&mu, &logvar});
  auto md = mu.data(), ld = logvar.data();
  double s = 0.0;
  for (std::size_t i = 0; i < md.size(); ++i) {
    s += 1.0 + ld[i] - md[i] * md[i] - std::exp(ld[i]);
  }
  out.data()[0] = -0.5 * s * inv_rows;
  tape.Record(out, [mu, logvar, out, inv_rows]() mutable {
    const double g = GradAccess::Incoming(out)[0] * inv_rows;
    auto md = mu.data(), ld = logvar.data();
    auto gm = GradAccess::Sink(mu);
    for (std::size_t i = 0; i < gm.size(); ++i) gm[i] += g * md[i];
    auto gl = GradAccess::Sink(logvar);
    for (std::size_t i = 0; i < gl.size(); ++i) {
      gl[i] += g * -0.5 * (1.0 - std::exp(ld[i]));
    }
  });
  return out;
}

Tensor ScaledDotProductAttention(Tape& tape, const Tensor& q, const Tensor& k,
                                 const Tensor& v,
                                 const AttentionLayout& layout) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2) {
    DimensionError("attention", q, k);
  }
  RequireSameShape("attention key/value", k, v);
  const std::size_t d = q.cols();
  const std::size_t heads = layout.num_heads;
  const std::size_t batch = layout.batch;
  if (heads == 0 || d % heads != 0) {
    throw Error(ErrorCode::kConfiguration,
                "model width " + std::to_string(d) +
                    " not divisible by num_heads " + std::to_string(heads));
  }
  if (k.cols() != d || batch == 0 || q.rows() % batch != 0 ||
      k.rows() % batch != 0) {
    DimensionError("attention", q, k);
  }
  const std::size_t q_len = q.rows() / batch;
  const std::size_t kv_len = k.rows() / batch;
  const AttentionMask* mask = layout.mask;
  if (mask != nullptr && mask->size() != q_len * kv_len) {
    throw Error(ErrorCode::kDimension,
                "attention mask has " + std::to_string(mask->size()) +
                    " entries, expected " + std::to_string(q_len * kv_len));
  }
  const std::size_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto stride = Eigen::OuterStride<>(static_cast<Eigen::Index>(d));
  const auto qi = static_cast<Eigen::Index>(q_len);
  const auto ki = static_cast<Eigen::Index>(kv_len);
  const auto hi = static_cast<Eigen::Index>(dh);

  Tensor out = tape.MakeOutput({q.rows(), d}, {&q, &k, &v});
  // Attention probabilities per (sample, head), kept for backward.
  auto probs = std::make_shared<std::vector<double>>(batch * heads * q_len *
                                                     kv_len);
  RowMat scores(qi, ki);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t qoff = b * q_len * d + h * dh;
      const std::size_t koff = b * kv_len * d + h * dh;
      ConstStridedMap qb(q.data().data() + qoff, qi, hi, stride);
      ConstStridedMap kb(k.data().data() + koff, ki, hi, stride);
      ConstStridedMap vb(v.data().data() + koff, ki, hi, stride);
      scores.noalias() = scale * (qb * kb.transpose());
      MatMap p(probs->data() + (b * heads + h) * q_len * kv_len, qi, ki);
      for (Eigen::Index r = 0; r < qi; ++r) {
        double mx = -std::numeric_limits<double>::infinity();
        bool any = false;
        for (Eigen::Index c = 0; c < ki; ++c) {
          if (mask && !(*mask)[r * kv_len + c]) continue;
          any = true;
          // NaN scores poison the row so the loss reports them.
          mx = std::isnan(scores(r, c)) ? scores(r, c)
                                        : std::max(mx, scores(r, c));
          if (std::isnan(mx)) break;
        }
        if (!any) {
          throw Error(ErrorCode::kContract,
                      "attention mask excludes every key of a query");
        }
        double z = 0.0;
        for (Eigen::Index c = 0; c < ki; ++c) {
          const double e = (mask && !(*mask)[r * kv_len + c])
                               ? 0.0
                               : std::exp(scores(r, c) - mx);
          p(r, c) = e;
          z += e;
        }
        p.row(r) /= z;
      }
      StridedMap ob(out.data().data() + b * q_len * d + h * dh, qi, hi,
                    stride);
      ob.noalias() = p * vb;
    }
  }
  tape.Record(out, [q, k, v, out, probs, batch, heads, q_len, kv_len, d, dh,
                    scale]() mutable {
    const auto stride = Eigen::OuterStride<>(static_cast<Eigen::Index>(d));
    const auto qi = static_cast<Eigen::Index>(q_len);
    const auto ki = static_cast<Eigen::Index>(kv_len);
    const auto hi = static_cast<Eigen::Index>(dh);
    auto gout = GradAccess::Incoming(out);
    auto gq = GradAccess::Sink(q);
    auto gk = GradAccess::Sink(k);
    auto gv = GradAccess::Sink(v);
    RowMat dp(qi, ki);
    RowMat ds(qi, ki);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t qoff = b * q_len * d + h * dh;
        const std::size_t koff = b * kv_len * d + h * dh;
        ConstStridedMap qb(q.data().data() + qoff, qi, hi, stride);
        ConstStridedMap kb(k.data().data() + koff, ki, hi, stride);
        ConstStridedMap vb(v.data().data() + koff, ki, hi, stride);
        ConstStridedMap dob(gout.data() + qoff, qi, hi, stride);
        ConstMatMap p(probs->data() + (b * heads + h) * q_len * kv_len, qi, ki);
        if (!gv.empty()) {
          StridedMap(gv.data() + koff, ki, hi, stride).noalias() +=
              p.transpose() * dob;
        }
        dp.noalias() = dob * vb.transpose();
        const Eigen::VectorXd row_dot = (dp.array() * p.array()).rowwise().sum();
        ds = (p.array() * (dp.colwise() - row_dot).array()) * scale;
        if (!gq.empty()) {
          StridedMap(gq.data() + qoff, qi, hi, stride).noalias() += ds * kb;
        }
        if (!gk.empty()) {
          StridedMap(gk.data() + koff, ki, hi, stride).noalias() +=
              ds.transpose() * qb;
        }
      }
    }
  });
  return out;
}

Tensor MultiHeadAttention(Tape& tape, const Tensor& query_in,
                          const Tensor& kv_in, const AttentionWeights& w,
                          const AttentionLayout& layout) {
  if (layout.num_heads == 0 || w.wq.cols() % layout.num_heads != 0) {
    throw Error(ErrorCode::kConfiguration,
                "model width " + std::to_string(w.wq.cols()) +
                    " not divisible by num_heads " +
                    std::to_string(layout.num_heads));
  }
  Tensor q = AddBias(tape, MatMul(tape, query_in, w.wq), w.bq);
  Tensor k = MatMul(tape, kv_in, w.wk);
  Tensor v = AddBias(tape, MatMul(tape, kv_in, w.wv), w.bv);
  Tensor heads = ScaledDotProductAttention(tape, q, k, v, layout);
  return AddBias(tape, MatMul(tape, heads, w.wo), w.bo);
}

}  // namespace hapchunk::tensor
