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

#include "hapchunk/policy/model.h"

#include <cmath>
#include <string>

#include "hapchunk/error.h"

namespace hapchunk::policy {
namespace {

using tensor::AttentionLayout;
using tensor::AttentionWeights;

// Visits every parameter in serialization order. `fan_in` is zero for
// tensors that are not drawn at random (biases and layer-norm terms); `one`
// marks layer-norm gains.
template <typename Params, typename Fn>
void VisitParams(Params& p, const PolicyConfig& cfg, Fn&& fn) {
  const std::size_t d = cfg.d_model, f = cfg.ffn_dim, z = cfg.z_dim;
  auto weight = [&](auto& t, std::size_t in, std::size_t out,
                    const std::string& name) {
    fn(t, tensor::Shape{in, out}, in, false, name);
  };
  auto table = [&](auto& t, std::size_t rows, const std::string& name) {
    fn(t, tensor::Shape{rows, d}, d, false, name);
  };
  auto bias = [&](auto& t, std::size_t n, const std::string& name) {
    fn(t, tensor::Shape{n}, 0, false, name);
  };
  auto norm = [&](auto& gain, auto& b, const std::string& name) {
    fn(gain, tensor::Shape{d}, 0, true, name + ".gain");
    fn(b, tensor::Shape{d}, 0, false, name + ".bias");
  };
  auto attention = [&](auto& a, const std::string& name) {
    weight(a.wq, d, d, name + ".wq");
    bias(a.bq, d, name + ".bq");
    weight(a.wk, d, d, name + ".wk");
    weight(a.wv, d, d, name + ".wv");
    bias(a.bv, d, name + ".bv");
    weight(a.wo, d, d, name + ".wo");
    bias(a.bo, d, name + ".bo");
  };
  auto ffn = [&](auto& layer, const std::string& name) {
    weight(layer.ffn_w1, d, f, name + ".ffn_w1");
    bias(layer.ffn_b1, f, name + ".ffn_b1");
    weight(layer.ffn_w2, f, d, name + ".ffn_w2");
    bias(layer.ffn_b2, d, name + ".ffn_b2");
  };

  weight(p.patch_w, kPatchDim, d, "patch_w");
  bias(p.patch_b, d, "patch_b");
  weight(p.proprio_w, 4, d, "proprio_w");
  bias(p.proprio_b, d, "proprio_b");
  if (cfg.haptic_enabled) {
    weight(p.force_w, 3, d, "force_w");
    bias(p.force_b, d, "force_b");
  }
  weight(p.latent_w, z, d, "latent_w");
  bias(p.latent_b, d, "latent_b");
  table(p.positions, cfg.num_tokens(), "positions");
  for (std::size_t i = 0; i < p.encoder.size(); ++i) {
    auto& l = p.encoder[i];
    const std::string n = "encoder." + std::to_string(i);
    norm(l.ln1_gain, l.ln1_bias, n + ".ln1");
    attention(l.attn, n + ".attn");
    norm(l.ln2_gain, l.ln2_bias, n + ".ln2");
    ffn(l, n);
  }
  norm(p.enc_ln_gain, p.enc_ln_bias, "encoder.ln");
  table(p.queries, cfg.chunk_k, "queries");
  for (std::size_t i = 0; i < p.decoder.size(); ++i) {
    auto& l = p.decoder[i];
    const std::string n = "decoder." + std::to_string(i);
    norm(l.ln1_gain, l.ln1_bias, n + ".ln1");
    attention(l.self_attn, n + ".self_attn");
    norm(l.ln2_gain, l.ln2_bias, n + ".ln2");
    attention(l.cross_attn, n + ".cross_attn");
    norm(l.ln3_gain, l.ln3_bias, n + ".ln3");
    ffn(l, n);
  }
  norm(p.dec_ln_gain, p.dec_ln_bias, "decoder.ln");
  weight(p.head_w, d, kActionDim, "head_w");
  bias(p.head_b, kActionDim, "head_b");
  weight(p.cvae_w, cfg.cvae_input_dim(), d, "cvae_w");
  bias(p.cvae_b, d, "cvae_b");
  weight(p.mu_w, d, z, "mu_w");
  bias(p.mu_b, z, "mu_b");
  weight(p.logvar_w, d, z, "logvar_w");
  bias(p.logvar_b, z, "logvar_b");
}

ModelParams Sized(const PolicyConfig& cfg) {
  ModelParams p;
  p.encoder.resize(cfg.n_encoder_layers);
  p.decoder.resize(cfg.n_decoder_layers);
  return p;
}

Tensor Linear(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b) {
  return tensor::AddBias(tape, tensor::MatMul(tape, x, w), b);
}

template <typename Layer>
Tensor FeedForward(Tape& tape, const Tensor& x, const Layer& l) {
  return Linear(tape, tensor::Gelu(tape, Linear(tape, x, l.ffn_w1, l.ffn_b1)),
                l.ffn_w2, l.ffn_b2);
}

}  // namespace

void PolicyConfig::Validate() const {
  auto fail = [](const std::string& msg) {
    throw Error(ErrorCode::kConfiguration, "invalid policy config: " + msg);
  };
  if (chunk_k < 1) fail("chunk_k must be >= 1");
  if (d_model < 2) fail("d_model must be >= 2");
  if (n_heads < 1 || d_model % n_heads != 0) {
    fail("d_model " + std::to_string(d_model) + " not divisible by n_heads " +
         std::to_string(n_heads));
  }
  if (ffn_dim < 1) fail("ffn_dim must be >= 1");
  if (z_dim < 1) fail("z_dim must be >= 1");
  if (!(beta_kl >= 0.0)) fail("beta_kl must be >= 0");
  if (!(lr > 0.0)) fail("lr must be > 0");
  if (batch_size < 1) fail("batch_size must be >= 1");
}

std::vector<Tensor> ModelParams::All() const {
  std::vector<Tensor> out;
  PolicyConfig cfg;
  cfg.haptic_enabled = force_w.defined();
  VisitParams(*this, cfg,
              [&](const Tensor& t, const tensor::Shape&, std::size_t, bool,
                  const std::string&) { out.push_back(t); });
  return out;
}

std::vector<std::string> ModelParams::Names() const {
  std::vector<std::string> out;
  PolicyConfig cfg;
  cfg.haptic_enabled = force_w.defined();
  VisitParams(*this, cfg,
              [&](const Tensor&, const tensor::Shape&, std::size_t, bool,
                  const std::string& name) { out.push_back(name); });
  return out;
}

std::size_t ModelParams::ParameterCount() const {
  std::size_t n = 0;
  for (const Tensor& t : All()) n += t.size();
  return n;
}

ModelParams ModelParams::Clone() const {
  ModelParams p = *this;
  PolicyConfig cfg;
  cfg.haptic_enabled = force_w.defined();
  VisitParams(p, cfg,
              [](Tensor& t, const tensor::Shape&, std::size_t, bool,
                 const std::string&) { t = t.Clone(); });
  return p;
}

std::size_t ParameterCount(const PolicyConfig& cfg) {
  const std::size_t d = cfg.d_model, f = cfg.ffn_dim, z = cfg.z_dim,
                    k = cfg.chunk_k;
  const std::size_t attention = 4 * d * d + 3 * d;
  const std::size_t ffn = 2 * d * f + f + d;
  const std::size_t encoder_layer = 4 * d + attention + ffn;
  const std::size_t decoder_layer = 6 * d + 2 * attention + ffn;
  std::size_t n = (kPatchDim + 1) * d + (4 + 1) * d + (z + 1) * d;
  if (cfg.haptic_enabled) n += (3 + 1) * d;
  n += cfg.num_tokens() * d;
  n += cfg.n_encoder_layers * encoder_layer + 2 * d;
  n += k * d + cfg.n_decoder_layers * decoder_layer + 2 * d;
  n += d * kActionDim + kActionDim;
  n += (cfg.cvae_input_dim() + 1) * d + 2 * (d * z + z);
  return n;
}

ModelParams AllocateParams(const PolicyConfig& cfg) {
  cfg.Validate();
  ModelParams p = Sized(cfg);
  VisitParams(p, cfg,
              [](Tensor& t, const tensor::Shape& shape, std::size_t, bool one,
                 const std::string&) {
                t = Tensor::Full(shape, one ? 1.0 : 0.0, true);
              });
  return p;
}

ModelParams InitParams(const PolicyConfig& cfg, std::uint64_t seed) {
  ModelParams p = AllocateParams(cfg);
  std::mt19937_64 rng(seed);
  VisitParams(p, cfg,
              [&](Tensor& t, const tensor::Shape&, std::size_t fan_in, bool,
                  const std::string&) {
                if (fan_in == 0) return;
                const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
                std::uniform_real_distribution<double> u(-a, a);
                for (double& v : t.data()) v = u(rng);
              });
  return p;
}

Tensor Tokenize(Tape& tape, std::span<const env::Observation> batch,
                const ModelParams& params, const PolicyConfig& cfg) {
  const std::size_t b = batch.size();
  const std::size_t d = cfg.d_model, n_tok = cfg.num_tokens();
  if (b == 0) throw Error(ErrorCode::kDimension, "tokenize: empty batch");
  if (params.positions.rows() != n_tok ||
      params.force_w.defined() != cfg.haptic_enabled) {
    throw Error(ErrorCode::kDimension,
                "tokenize: parameters do not match config (" +
                    std::to_string(params.positions.rows()) + " vs " +
                    std::to_string(n_tok) + " tokens)");
  }

  std::vector<double> patches(b * kNumPatches * kPatchDim);
  std::vector<double> proprio(b * 4), force(b * 3);
  for (std::size_t s = 0; s < b; ++s) {
    const env::Observation& o = batch[s];
    for (std::size_t p = 0; p < kNumPatches; ++p) {
      const std::size_t pr = p / kPatchesPerSide, pc = p % kPatchesPerSide;
      double* row = &patches[(s * kNumPatches + p) * kPatchDim];
      for (std::size_t i = 0; i < kPatchSide; ++i) {
        for (std::size_t j = 0; j < kPatchSide; ++j) {
          row[i * kPatchSide + j] =
              o.image[(pr * kPatchSide + i) * env::kImageSide +
                      pc * kPatchSide + j];
        }
      }
    }
    std::copy(o.proprio.begin(), o.proprio.end(), proprio.begin() + 4 * s);
    std::copy(o.force.begin(), o.force.end(), force.begin() + 3 * s);
  }

  std::vector<Tensor> parts;
  parts.push_back(Linear(
      tape, Tensor::FromData({b * kNumPatches, kPatchDim}, std::move(patches)),
      params.patch_w, params.patch_b));
  parts.push_back(Linear(tape, Tensor::FromData({b, 4}, std::move(proprio)),
                         params.proprio_w, params.proprio_b));
  if (cfg.haptic_enabled) {
    parts.push_back(Linear(tape, Tensor::FromData({b, 3}, std::move(force)),
                           params.force_w, params.force_b));
  }
  parts.push_back(tensor::TileRows(
      tape, tensor::Reshape(tape, params.latent_b, {1, d}), b));
  const Tensor stacked = tensor::ConcatRows(tape, parts);

  // Stacked rows: all patches, then one block of b rows per extra token.
  std::vector<std::size_t> order(b * n_tok);
  for (std::size_t s = 0; s < b; ++s) {
    for (std::size_t t = 0; t < n_tok; ++t) {
      order[s * n_tok + t] = t < kNumPatches
                                 ? s * kNumPatches + t
                                 : b * kNumPatches + (t - kNumPatches) * b + s;
    }
  }
  return tensor::Add(tape, tensor::GatherRows(tape, stacked, order),
                     tensor::TileRows(tape, params.positions, b));
}

Posterior CvaeEncode(Tape& tape, const Tensor& chunks, const Tensor& proprio,
                     const ModelParams& params, const PolicyConfig& cfg) {
  const std::size_t b = chunks.rows();
  const std::size_t width = kActionDim * cfg.chunk_k;
  if (chunks.rank() != 2 || chunks.cols() != width || proprio.rank() != 2 ||
      proprio.rows() != b || proprio.cols() != 4) {
    throw Error(ErrorCode::kDimension,
                "cvae_encode expects [b x " + std::to_string(width) +
                    "] chunks and [b x 4] proprio");
  }
  // Inputs are data; the encoder sees their concatenation.
  std::vector<double> in(b * cfg.cvae_input_dim());
  auto cd = chunks.data();
  auto pd = proprio.data();
  for (std::size_t s = 0; s < b; ++s) {
    double* row = &in[s * cfg.cvae_input_dim()];
    std::copy_n(cd.begin() + s * width, width, row);
    std::copy_n(pd.begin() + s * 4, 4, row + width);
  }
  const Tensor x = Tensor::FromData({b, cfg.cvae_input_dim()}, std::move(in));
  const Tensor h =
      tensor::Gelu(tape, Linear(tape, x, params.cvae_w, params.cvae_b));
  Posterior post;
  post.mu = Linear(tape, h, params.mu_w, params.mu_b);
  post.logvar = tensor::Clamp(tape, Linear(tape, h, params.logvar_w,
                                           params.logvar_b),
                              kLogvarMin, kLogvarMax);
  return post;
}

Tensor SampleLatent(Tape& tape, const Posterior& posterior,
                    std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> eps(posterior.mu.size());
  for (double& e : eps) e = normal(rng);
  const Tensor noise = Tensor::FromData(posterior.mu.shape(), std::move(eps));
  const Tensor sigma =
      tensor::Exp(tape, tensor::Scale(tape, posterior.logvar, 0.5));
  return tensor::Add(tape, posterior.mu, tensor::Mul(tape, sigma, noise));
}

Tensor Forward(Tape& tape, const Tensor& tokens, const Tensor& z,
               const ModelParams& params, const PolicyConfig& cfg) {
  const std::size_t d = cfg.d_model, n_tok = cfg.num_tokens();
  if (tokens.rank() != 2 || tokens.cols() != d || tokens.rows() % n_tok != 0) {
    throw Error(ErrorCode::kDimension,
                "forward: token matrix " + tensor::ShapeString(tokens.shape()) +
                    " is not a multiple of " + std::to_string(n_tok) +
                    " tokens of width " + std::to_string(d));
  }
  const std::size_t b = tokens.rows() / n_tok;
  if (z.rank() != 2 || z.rows() != b || z.cols() != cfg.z_dim) {
    throw Error(ErrorCode::kDimension,
                "forward: latent " + tensor::ShapeString(z.shape()) +
                    " does not match batch " + std::to_string(b));
  }

  // Scatter the projected latent into each sample's latent slot.
  const Tensor projected = tensor::MatMul(tape, z, params.latent_w);
  const Tensor padded =
      tensor::ConcatRows(tape, {Tensor::Zeros({1, d}), projected});
  std::vector<std::size_t> slot(b * n_tok, 0);
  for (std::size_t s = 0; s < b; ++s) {
    slot[s * n_tok + cfg.latent_token()] = 1 + s;
  }
  Tensor x =
      tensor::Add(tape, tokens, tensor::GatherRows(tape, padded, slot));

  const AttentionLayout layout{cfg.n_heads, b, nullptr};
  for (const EncoderLayer& l : params.encoder) {
    Tensor h = tensor::LayerNorm(tape, x, l.ln1_gain, l.ln1_bias);
    x = tensor::Add(tape, x, tensor::MultiHeadAttention(tape, h, h, l.attn,
                                                        layout));
    h = tensor::LayerNorm(tape, x, l.ln2_gain, l.ln2_bias);
    x = tensor::Add(tape, x, FeedForward(tape, h, l));
  }
  const Tensor memory =
      tensor::LayerNorm(tape, x, params.enc_ln_gain, params.enc_ln_bias);

  Tensor q = tensor::TileRows(tape, params.queries, b);
  for (const DecoderLayer& l : params.decoder) {
    Tensor h = tensor::LayerNorm(tape, q, l.ln1_gain, l.ln1_bias);
    q = tensor::Add(tape, q, tensor::MultiHeadAttention(tape, h, h,
                                                        l.self_attn, layout));
    h = tensor::LayerNorm(tape, q, l.ln2_gain, l.ln2_bias);
    q = tensor::Add(tape, q, tensor::MultiHeadAttention(tape, h, memory,
                                                        l.cross_attn, layout));
    h = tensor::LayerNorm(tape, q, l.ln3_gain, l.ln3_bias);
    q = tensor::Add(tape, q, FeedForward(tape, h, l));
  }
  const Tensor out =
      tensor::LayerNorm(tape, q, params.dec_ln_gain, params.dec_ln_bias);
  return Linear(tape, out, params.head_w, params.head_b);
}

LossTerms Loss(Tape& tape, const Tensor& pred, const Tensor& target,
               const Posterior& posterior, double beta) {
  LossTerms terms;
  terms.reconstruction = tensor::L1Loss(tape, pred, target);
  terms.kl = tensor::KlGaussian(tape, posterior.mu, posterior.logvar);
  terms.total = tensor::Add(tape, terms.reconstruction,
                            tensor::Scale(tape, terms.kl, beta));
  return terms;
}

}  // namespace hapchunk::policy
