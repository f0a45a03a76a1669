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

#ifndef HAPCHUNK_TENSOR_OPS_H_
#define HAPCHUNK_TENSOR_OPS_H_

#include <cstddef>
#include <span>
#include <vector>

#include "hapchunk/tensor/tensor.h"

namespace hapchunk::tensor {

// Differentiable primitives. Every op takes the tape it records onto; pass a
// non-recording tape for inference. Ops that treat their input as a matrix
// view a rank-n tensor as [prod(leading dims) x last dim].

// [m x k] * [k x n] -> [m x n].
Tensor MatMul(Tape& tape, const Tensor& a, const Tensor& b);

// Elementwise, identical shapes.
Tensor Add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor Sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor Mul(Tape& tape, const Tensor& a, const Tensor& b);

// Adds a length-n bias to every row of an [m x n] matrix. This is the only
// broadcasting form supported.
Tensor AddBias(Tape& tape, const Tensor& x, const Tensor& bias);

Tensor Scale(Tape& tape, const Tensor& x, double factor);
Tensor Exp(Tape& tape, const Tensor& x);

// x * sigmoid(1.702 x).
Tensor Gelu(Tape& tape, const Tensor& x);

// Gradient passes where lo <= x <= hi and is zero elsewhere.
Tensor Clamp(Tape& tape, const Tensor& x, double lo, double hi);

// Sum of all elements, as a scalar.
Tensor Sum(Tape& tape, const Tensor& x);

// Numerically stable softmax along `axis`.
Tensor Softmax(Tape& tape, const Tensor& x, std::size_t axis);

// Per-row (x - mean) / sqrt(var + eps) * gain + bias over the last
// dimension; var is the biased estimator. Requires a last dimension >= 2.
Tensor LayerNorm(Tape& tape, const Tensor& x, const Tensor& gain,
                 const Tensor& bias, double eps = 1e-5);

// Row manipulation on [m x n] matrices.
Tensor ConcatRows(Tape& tape, const std::vector<Tensor>& parts);
Tensor GatherRows(Tape& tape, const Tensor& x,
                  std::span<const std::size_t> rows);
// Stacks `times` copies of x vertically.
Tensor TileRows(Tape& tape, const Tensor& x, std::size_t times);
Tensor Reshape(Tape& tape, const Tensor& x, Shape shape);

// Mean absolute difference over all elements.
Tensor L1Loss(Tape& tape, const Tensor& pred, const Tensor& target);

// KL(N(mu, exp(logvar)) || N(0, I)) = -0.5 * sum(1 + logvar - mu^2 -
// exp(logvar)). Rank-1 inputs give the plain sum; for [b x z] inputs the
// per-row sums are averaged over the b rows.
Tensor KlGaussian(Tape& tape, const Tensor& mu, const Tensor& logvar);

// Row-major [q_len x kv_len] mask; false entries are excluded.
using AttentionMask = std::vector<bool>;

struct AttentionLayout {
  std::size_t num_heads = 1;
  // q holds batch * q_len rows and k/v hold batch * kv_len rows, each sample
  // contiguous.
  std::size_t batch = 1;
  const AttentionMask* mask = nullptr;
};

// Per-sample, per-head softmax(Q K^T / sqrt(d_head)) V with the head outputs
// laid side by side in the result. Fused so the backward pass does not
// materialise per-head intermediates on the tape.
Tensor ScaledDotProductAttention(Tape& tape, const Tensor& q, const Tensor& k,
                                 const Tensor& v, const AttentionLayout& layout);

// Projection weights of one attention block, stored [in x out]. The key
// projection has no bias: it would shift every logit of a query by the same
// amount and so never receive a gradient.
struct AttentionWeights {
  Tensor wq, bq;
  Tensor wk;
  Tensor wv, bv;
  Tensor wo, bo;
};

// Multi-head attention of `query_in` over `kv_in`; throws kConfiguration when
// the model width is not divisible by num_heads.
Tensor MultiHeadAttention(Tape& tape, const Tensor& query_in,
                          const Tensor& kv_in, const AttentionWeights& w,
                          const AttentionLayout& layout);

}  // namespace hapchunk::tensor

#endif  // HAPCHUNK_TENSOR_OPS_H_
