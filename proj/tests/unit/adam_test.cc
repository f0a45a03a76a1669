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

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "hapchunk/error.h"
#include "hapchunk/tensor/adam.h"
#include "hapchunk/tensor/ops.h"

namespace hapchunk::tensor {
namespace {

TEST(AdamTest, ZeroGradientLeavesParamsUnchanged) {
  std::vector<Tensor> params = {Tensor::FromData({3}, {0.5, -1.0, 2.0}, true)};
  AdamState state = AdamState::For(params, {});
  for (int i = 0; i < 5; ++i) AdamStep(params, state);
  EXPECT_EQ(params[0].data()[0], 0.5);
  EXPECT_EQ(params[0].data()[1], -1.0);
  EXPECT_EQ(params[0].data()[2], 2.0);
  EXPECT_EQ(state.step, 5u);
}

TEST(AdamTest, FirstStepMovesBySignTimesLr) {
  // After one step m_hat = g and v_hat = g^2, so the update is
  // -lr * g / (|g| + eps).
  std::vector<Tensor> params = {Tensor::FromData({3}, {0.0, 0.0, 0.0}, true)};
  const double g[] = {0.3, -2.0, 1e-3};
  for (int i = 0; i < 3; ++i) params[0].grad()[i] = g[i];
  AdamOptions opt;
  opt.lr = 0.01;
  AdamState state = AdamState::For(params, opt);
  AdamStep(params, state);
  for (int i = 0; i < 3; ++i) {
    const double expect = -opt.lr * g[i] / (std::abs(g[i]) + opt.eps);
    EXPECT_NEAR(params[0].data()[i], expect, 1e-15);
    EXPECT_NEAR(params[0].data()[i], -opt.lr * (g[i] > 0 ? 1 : -1), 1e-6);
  }
}

TEST(AdamTest, DescendsQuadratic) {
  std::vector<Tensor> params = {Tensor::Scalar(1.0, true)};
  AdamOptions opt;
  opt.lr = 0.1;
  AdamState state = AdamState::For(params, opt);
  for (int i = 0; i < 100; ++i) {
    ZeroGrads(params);
    Tape tape;
    tape.Backward(Mul(tape, params[0], params[0]));
    AdamStep(params, state);
  }
  EXPECT_LT(std::abs(params[0].item()), 0.1);
  EXPECT_EQ(state.step, 100u);
}

TEST(AdamTest, FrozenParametersSkipped) {
  std::vector<Tensor> params = {Tensor::FromData({1}, {1.0}, false),
                                Tensor::FromData({1}, {1.0}, true)};
  params[1].grad()[0] = 1.0;
  AdamState state = AdamState::For(params, {});
  AdamStep(params, state);
  EXPECT_EQ(params[0].data()[0], 1.0);
  EXPECT_LT(params[1].data()[0], 1.0);
}

TEST(AdamTest, ShapeMismatchIsDimensionError) {
  std::vector<Tensor> params = {Tensor::Zeros({2}, true)};
  AdamState state = AdamState::For(params, {});
  std::vector<Tensor> other = {Tensor::Zeros({3}, true)};
  try {
    AdamStep(other, state);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimension);
  }
  std::vector<Tensor> more = {Tensor::Zeros({2}, true), Tensor::Zeros({1}, true)};
  EXPECT_THROW(AdamStep(more, state), Error);
}

}  // namespace
}  // namespace hapchunk::tensor
