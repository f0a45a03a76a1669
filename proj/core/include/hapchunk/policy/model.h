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

#ifndef HAPCHUNK_POLICY_MODEL_H_
#define HAPCHUNK_POLICY_MODEL_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hapchunk/env/env.h"
#include "hapchunk/tensor/ops.h"
#include "hapchunk/tensor/tensor.h"

namespace hapchunk::policy {

using tensor::Tape;
using tensor::Tensor;

inline constexpr std::size_t kPatchSide = 8;
inline constexpr std::size_t kPatchesPerSide = env::kImageSide / kPatchSide;
inline constexpr std::size_t kNumPatches = kPatchesPerSide * kPatchesPerSide;
inline constexpr std::size_t kPatchDim = kPatchSide * kPatchSide;
inline constexpr std::size_t kActionDim = 4;
inline constexpr double kLogvarMin = -10.0;
inline constexpr double kLogvarMax = 10.0;

struct PolicyConfig {
  std::size_t chunk_k = 10;
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t n_encoder_layers = 2;
  std::size_t n_decoder_layers = 2;
  std::size_t ffn_dim = 128;
  std::size_t z_dim = 16;
  double beta_kl = 10.0;
  bool haptic_enabled = true;
  double lr = 1e-3;
  std::size_t train_steps = 3000;
  std::size_t batch_size = 8;
  std::uint64_t rng_seed = 0;

  // Throws kConfiguration.
  void Validate() const;
  // 16 patches + proprio + optional force + latent slot.
  std::size_t num_tokens() const { return kNumPatches + (haptic_enabled ? 3 : 2); }
  std::size_t proprio_token() const { return kNumPatches; }
  std::size_t latent_token() const { return num_tokens() - 1; }
  std::size_t cvae_input_dim() const { return kActionDim * chunk_k + 4; }

  bool operator==(const PolicyConfig&) const = default;
};

struct EncoderLayer {
  Tensor ln1_gain, ln1_bias;
  tensor::AttentionWeights attn;
  Tensor ln2_gain, ln2_bias;
  Tensor ffn_w1, ffn_b1, ffn_w2, ffn_b2;
};

struct DecoderLayer {
  Tensor ln1_gain, ln1_bias;
  tensor::AttentionWeights self_attn;
  Tensor ln2_gain, ln2_bias;
  tensor::AttentionWeights cross_attn;
  Tensor ln3_gain, ln3_bias;
  Tensor ffn_w1, ffn_b1, ffn_w2, ffn_b2;
};

// Weight matrices are stored [in x out]. The force embedding is empty (never
// allocated) when haptics are disabled.
struct ModelParams {
  Tensor patch_w, patch_b;      // [64 x d], [d]
  Tensor proprio_w, proprio_b;  // [4 x d], [d]
  Tensor force_w, force_b;      // [3 x d], [d]
  Tensor latent_w, latent_b;    // [z x d], [d]
  Tensor positions;             // [tokens x d]
  std::vector<EncoderLayer> encoder;
  Tensor enc_ln_gain, enc_ln_bias;
  Tensor queries;               // [k x d]
  std::vector<DecoderLayer> decoder;
  Tensor dec_ln_gain, dec_ln_bias;
  Tensor head_w, head_b;        // [d x 4], [4]
  Tensor cvae_w, cvae_b;        // [(4k + 4) x d], [d]
  Tensor mu_w, mu_b;            // [d x z], [z]
  Tensor logvar_w, logvar_b;    // [d x z], [z]

  // Every tensor in the fixed serialization order.
  std::vector<Tensor> All() const;
  std::vector<std::string> Names() const;
  std::size_t ParameterCount() const;
  ModelParams Clone() const;
};

// Closed-form parameter count for a config.
std::size_t ParameterCount(const PolicyConfig& cfg);

// Weights uniform in +-1/sqrt(fan_in) (fan_in = d_model for positional and
// query tables), biases and layer-norm offsets zero, layer-norm gains one.
ModelParams InitParams(const PolicyConfig& cfg, std::uint64_t seed);

// Zero-filled parameters with the right shapes, for deserialization.
ModelParams AllocateParams(const PolicyConfig& cfg);

using ActionChunk = std::vector<std::array<double, kActionDim>>;

// Token matrix [batch * tokens x d], each sample's tokens contiguous. The
// latent slot holds only its positional embedding and bias; Forward adds
// the projected latent.
Tensor Tokenize(Tape& tape, std::span<const env::Observation> batch,
                const ModelParams& params, const PolicyConfig& cfg);

struct Posterior {
  Tensor mu;      // [batch x z]
  Tensor logvar;  // [batch x z], clamped
};

// chunks: [batch x 4k] (row-major steps), proprio: [batch x 4].
Posterior CvaeEncode(Tape& tape, const Tensor& chunks, const Tensor& proprio,
                     const ModelParams& params, const PolicyConfig& cfg);

// z = mu + exp(0.5 logvar) * eps, eps ~ N(0, I) drawn from `rng`.
Tensor SampleLatent(Tape& tape, const Posterior& posterior,
                    std::mt19937_64& rng);

// Returns the predicted chunks as [batch * k x 4].
Tensor Forward(Tape& tape, const Tensor& tokens, const Tensor& z,
               const ModelParams& params, const PolicyConfig& cfg);

struct LossTerms {
  Tensor total;
  Tensor reconstruction;
  Tensor kl;
};

LossTerms Loss(Tape& tape, const Tensor& pred, const Tensor& target,
               const Posterior& posterior, double beta);

}  // namespace hapchunk::policy

#endif  // HAPCHUNK_POLICY_MODEL_H_
