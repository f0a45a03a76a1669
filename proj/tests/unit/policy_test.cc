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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>

#include "hapchunk/demo/dataset.h"
#include "hapchunk/error.h"
#include "hapchunk/policy/checkpoint.h"
#include "hapchunk/policy/model.h"
#include "hapchunk/policy/train.h"
#include "hapchunk/tensor/grad_check.h"

namespace hapchunk::policy {
namespace {

namespace fs = std::filesystem;

void ExpectCode(ErrorCode code, const std::function<void()>& fn,
                const std::string& needle = "") {
  try {
    fn();
    ADD_FAILURE() << "expected " << ErrorCodeName(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
    EXPECT_NE(std::string(e.what()).find(needle), std::string::npos)
        << e.what();
  }
}

PolicyConfig Tiny() {
  PolicyConfig c;
  c.chunk_k = 3;
  c.d_model = 4;
  c.n_heads = 2;
  c.n_encoder_layers = 1;
  c.n_decoder_layers = 1;
  c.ffn_dim = 8;
  c.z_dim = 2;
  c.batch_size = 2;
  return c;
}

env::Observation RandomObservation(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  env::Observation o;
  for (double& v : o.image) v = u(rng);
  for (double& v : o.force) v = u(rng) - 0.5;
  for (double& v : o.proprio) v = u(rng);
  return o;
}

const demo::Dataset& SmallDataset() {
  static const demo::Dataset ds = demo::BuildDataset(3, 1, 31);
  return ds;
}

double At(const Tensor& t, std::size_t r, std::size_t c) {
  return t.data()[r * t.cols() + c];
}

TEST(PolicyConfig, Validation) {
  PolicyConfig c;
  c.n_heads = 3;
  ExpectCode(ErrorCode::kConfiguration, [&] { c.Validate(); }, "divisible");
  c = PolicyConfig{};
  c.chunk_k = 0;
  ExpectCode(ErrorCode::kConfiguration, [&] { c.Validate(); });
}

TEST(ModelParams, DefaultParameterCount) {
  // Hand count for d=64, ffn=128, k=10, z=16, 2+2 layers, 19 tokens.
  const std::size_t embeddings = 65 * 64 + 5 * 64 + 4 * 64 + 17 * 64;
  const std::size_t positions = 19 * 64;
  const std::size_t attention = 4 * 64 * 64 + 3 * 64;
  const std::size_t ffn = 2 * 64 * 128 + 128 + 64;
  const std::size_t encoder = 2 * (2 * 128 + attention + ffn) + 128;
  const std::size_t decoder = 10 * 64 + 2 * (3 * 128 + 2 * attention + ffn) + 128;
  const std::size_t head = 64 * 4 + 4;
  const std::size_t cvae = 45 * 64 + 2 * (64 * 16 + 16);
  const std::size_t want =
      embeddings + positions + encoder + decoder + head + cvae;
  EXPECT_EQ(want, 180196u);
  PolicyConfig cfg;
  EXPECT_EQ(ParameterCount(cfg), want);
  EXPECT_EQ(InitParams(cfg, 1).ParameterCount(), want);
  cfg.haptic_enabled = false;
  EXPECT_EQ(ParameterCount(cfg), want - 4 * 64 - 64);
  EXPECT_EQ(InitParams(cfg, 1).ParameterCount(), ParameterCount(cfg));
}

TEST(ModelParams, CountIsPureFunctionOfConfig) {
  for (std::size_t layers : {0u, 1u, 3u}) {
    for (bool haptic : {true, false}) {
      PolicyConfig c = Tiny();
      c.n_encoder_layers = layers;
      c.n_decoder_layers = 3 - layers;
      c.haptic_enabled = haptic;
      EXPECT_EQ(AllocateParams(c).ParameterCount(), ParameterCount(c));
    }
  }
}

TEST(ModelParams, InitializationRanges) {
  const ModelParams p = InitParams(PolicyConfig{}, 3);
  const double a = 1.0 / std::sqrt(64.0);
  for (double v : p.patch_w.data()) EXPECT_LE(std::abs(v), 1.0 / 8.0);
  for (double v : p.encoder[0].attn.wq.data()) EXPECT_LE(std::abs(v), a);
  for (double v : p.positions.data()) EXPECT_LE(std::abs(v), a);
  for (double v : p.patch_b.data()) EXPECT_EQ(v, 0.0);
  for (double v : p.enc_ln_gain.data()) EXPECT_EQ(v, 1.0);
  EXPECT_EQ(p.Names().size(), p.All().size());
  EXPECT_EQ(p.Names().front(), "patch_w");
  EXPECT_EQ(p.Names().back(), "logvar_b");
}

TEST(Tokenize, TokenCounts) {
  std::mt19937_64 rng(1);
  const env::Observation o = RandomObservation(rng);
  PolicyConfig c = Tiny();
  Tape tape(false);
  EXPECT_EQ(Tokenize(tape, {&o, 1}, InitParams(c, 1), c).rows(), 19u);
  c.haptic_enabled = false;
  EXPECT_EQ(Tokenize(tape, {&o, 1}, InitParams(c, 1), c).rows(), 18u);
}

TEST(Tokenize, MismatchedParamsIsDimensionError) {
  PolicyConfig c = Tiny();
  const ModelParams p = InitParams(c, 1);
  c.haptic_enabled = false;
  env::Observation o;
  Tape tape(false);
  ExpectCode(ErrorCode::kDimension, [&] { Tokenize(tape, {&o, 1}, p, c); });
}

TEST(Tokenize, ZeroObservationGivesPositionsPlusBiases) {
  const PolicyConfig c = Tiny();
  ModelParams p = InitParams(c, 2);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  for (Tensor b : {p.patch_b, p.proprio_b, p.force_b, p.latent_b}) {
    for (double& v : b.data()) v = u(rng);
  }
  const env::Observation zero;
  Tape tape(false);
  const Tensor tokens = Tokenize(tape, {&zero, 1}, p, c);
  for (std::size_t t = 0; t < 19; ++t) {
    const Tensor& bias = t < 16 ? p.patch_b
                         : t == 16 ? p.proprio_b
                         : t == 17 ? p.force_b
                                   : p.latent_b;
    for (std::size_t j = 0; j < 4; ++j) {
      EXPECT_DOUBLE_EQ(At(tokens, t, j),
                       At(p.positions, t, j) + bias.data()[j]);
    }
  }
}

TEST(Tokenize, MatchesDenseLoopOracle) {
  const PolicyConfig c = Tiny();
  const ModelParams p = InitParams(c, 9);
  std::mt19937_64 rng(7);
  const env::Observation o = RandomObservation(rng);
  Tape tape(false);
  const Tensor tokens = Tokenize(tape, {&o, 1}, p, c);
  for (std::size_t t = 0; t < 19; ++t) {
    for (std::size_t j = 0; j < 4; ++j) {
      double want = At(p.positions, t, j);
      if (t < 16) {
        const std::size_t pr = t / 4, pc = t % 4;
        for (std::size_t a = 0; a < 8; ++a) {
          for (std::size_t b = 0; b < 8; ++b) {
            want += o.image[(pr * 8 + a) * 32 + pc * 8 + b] *
                    At(p.patch_w, a * 8 + b, j);
          }
        }
        want += p.patch_b.data()[j];
      } else if (t == 16) {
        for (std::size_t a = 0; a < 4; ++a) {
          want += o.proprio[a] * At(p.proprio_w, a, j);
        }
      } else if (t == 17) {
        for (std::size_t a = 0; a < 3; ++a) {
          want += o.force[a] * At(p.force_w, a, j);
        }
      }
      EXPECT_NEAR(At(tokens, t, j), want, 1e-12) << t << "," << j;
    }
  }
}

TEST(Tokenize, BatchRowsAreContiguousPerSample) {
  const PolicyConfig c = Tiny();
  const ModelParams p = InitParams(c, 4);
  std::mt19937_64 rng(8);
  std::vector<env::Observation> batch = {RandomObservation(rng),
                                         RandomObservation(rng)};
  Tape tape(false);
  const Tensor both = Tokenize(tape, batch, p, c);
  const Tensor second = Tokenize(tape, {&batch[1], 1}, p, c);
  for (std::size_t i = 0; i < second.size(); ++i) {
    EXPECT_EQ(both.data()[19 * 4 + i], second.data()[i]);
  }
}

TEST(CvaeEncode, DeterministicAndPositiveKl) {
  const PolicyConfig c;
  const ModelParams p = InitParams(c, 11);
  std::mt19937_64 rng(3);
  const auto batch = SampleTrainingBatch(SmallDataset(), 10, 8, rng);
  std::vector<double> chunks, proprio;
  for (const TrainingSample& s : batch) {
    for (const auto& a : s.target) chunks.insert(chunks.end(), a.begin(), a.end());
    proprio.insert(proprio.end(), s.observation.proprio.begin(),
                   s.observation.proprio.end());
  }
  const Tensor ct = Tensor::FromData({8, 40}, chunks);
  const Tensor pt = Tensor::FromData({8, 4}, proprio);
  Tape tape(false);
  const Posterior a = CvaeEncode(tape, ct, pt, p, c);
  const Posterior b = CvaeEncode(tape, ct, pt, p, c);
  EXPECT_EQ(std::vector<double>(a.mu.data().begin(), a.mu.data().end()),
            std::vector<double>(b.mu.data().begin(), b.mu.data().end()));
  EXPECT_EQ(std::vector<double>(a.logvar.data().begin(), a.logvar.data().end()),
            std::vector<double>(b.logvar.data().begin(), b.logvar.data().end()));
  for (double v : a.mu.data()) EXPECT_TRUE(std::isfinite(v));
  EXPECT_GT(tensor::KlGaussian(tape, a.mu, a.logvar).item(), 0.0);
}

TEST(CvaeEncode, KlGradientMatchesFiniteDifferences) {
  const PolicyConfig c = Tiny();
  ModelParams p = InitParams(c, 12);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> chunks(2 * 12), proprio(2 * 4);
  for (double& v : chunks) v = u(rng);
  for (double& v : proprio) v = u(rng);
  const Tensor ct = Tensor::FromData({2, 12}, chunks);
  const Tensor pt = Tensor::FromData({2, 4}, proprio);
  // Freeze everything outside the CVAE encoder.
  std::vector<Tensor> all = p.All();
  for (Tensor& t : all) t.set_requires_grad(false);
  std::vector<Tensor> cvae = {p.cvae_w, p.cvae_b, p.mu_w,
                              p.mu_b,   p.logvar_w, p.logvar_b};
  for (Tensor& t : cvae) t.set_requires_grad(true);
  const auto report = tensor::GradientCheck(
      [&](Tape& tape) {
        const Posterior post = CvaeEncode(tape, ct, pt, p, c);
        return tensor::KlGaussian(tape, post.mu, post.logvar);
      },
      all, {.n_probes = 64, .seed = 2});
  EXPECT_LE(report.max_rel_error, 1e-5);
}

TEST(SampleLatent, CollapsedVarianceReturnsMean) {
  Tape tape(false);
  Posterior post{Tensor::FromData({1, 3}, {0.3, -0.2, 0.7}),
                 Tensor::Full({1, 3}, kLogvarMin)};
  std::mt19937_64 rng(1);
  const Tensor z = SampleLatent(tape, post, rng);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(z.data()[i], post.mu.data()[i], 6 * std::exp(-5.0));
  }
}

TEST(SampleLatent, MonteCarloMean) {
  const std::size_t n = 100000;
  const double sigma = std::exp(0.5 * 0.4);
  Tape tape(false);
  Posterior post{Tensor::Full({n, 2}, 0.25), Tensor::Full({n, 2}, 0.4)};
  std::mt19937_64 rng(77);
  const Tensor z = SampleLatent(tape, post, rng);
  for (std::size_t col = 0; col < 2; ++col) {
    double sum = 0.0;
    for (std::size_t r = 0; r < n; ++r) sum += z.data()[r * 2 + col];
    EXPECT_NEAR(sum / n, 0.25, 4 * sigma / std::sqrt(double(n)));
  }
}

TEST(SampleLatent, SeededRngReproduces) {
  Tape tape(false);
  Posterior post{Tensor::Full({2, 3}, 0.1), Tensor::Full({2, 3}, -0.3)};
  std::mt19937_64 a(9), b(9);
  const Tensor za = SampleLatent(tape, post, a);
  const Tensor zb = SampleLatent(tape, post, b);
  for (std::size_t i = 0; i < za.size(); ++i) {
    EXPECT_EQ(za.data()[i], zb.data()[i]);
  }
}

TEST(Forward, ShapeAndDeterminism) {
  const PolicyConfig c;
  const ModelParams p = InitParams(c, 13);
  std::mt19937_64 rng(2);
  const env::Observation o = RandomObservation(rng);
  Tape tape(false);
  const Tensor tokens = Tokenize(tape, {&o, 1}, p, c);
  const Tensor z = Tensor::Full({1, 16}, 0.3);
  const Tensor a = Forward(tape, tokens, z, p, c);
  const Tensor b = Forward(tape, tokens, z, p, c);
  EXPECT_EQ(a.shape(), (tensor::Shape{10, 4}));
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.data()[i], b.data()[i]);
}

TEST(Forward, LatentChangesOutput) {
  const PolicyConfig c = Tiny();
  const ModelParams p = InitParams(c, 14);
  env::Observation o;
  Tape tape(false);
  const Tensor tokens = Tokenize(tape, {&o, 1}, p, c);
  const Tensor a = Forward(tape, tokens, Tensor::Zeros({1, 2}), p, c);
  const Tensor b = Forward(tape, tokens, Tensor::Full({1, 2}, 1.0), p, c);
  double diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += std::abs(a.data()[i] - b.data()[i]);
  }
  EXPECT_GT(diff, 1e-6);
}

TEST(Forward, PatchPermutationInvariance) {
  const PolicyConfig c;
  const ModelParams p = InitParams(c, 15);
  std::mt19937_64 rng(6);
  const env::Observation o = RandomObservation(rng);
  Tape tape(false);
  const Tensor tokens = Tokenize(tape, {&o, 1}, p, c);
  Tensor swapped = tokens.Clone();
  for (std::size_t j = 0; j < 64; ++j) {
    std::swap(swapped.data()[3 * 64 + j], swapped.data()[11 * 64 + j]);
  }
  const Tensor z = Tensor::Full({1, 16}, -0.2);
  const Tensor a = Forward(tape, tokens, z, p, c);
  const Tensor b = Forward(tape, swapped, z, p, c);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_NEAR(a.data()[i], b.data()[i], 1e-12);
  }
}

TEST(Forward, WrongTokenCountIsDimensionError) {
  const PolicyConfig c = Tiny();
  const ModelParams p = InitParams(c, 1);
  Tape tape(false);
  ExpectCode(ErrorCode::kDimension, [&] {
    Forward(tape, Tensor::Zeros({18, 4}), Tensor::Zeros({1, 2}), p, c);
  });
}

TEST(Forward, NoHapticModelIgnoresForce) {
  PolicyConfig c;
  c.haptic_enabled = false;
  const ModelParams p = InitParams(c, 16);
  std::mt19937_64 rng(10);
  env::Observation a = RandomObservation(rng);
  env::Observation b = a;
  b.force = {5.0, -3.0, 1.97};
  EXPECT_EQ(Predict(a, p, c), Predict(b, p, c));
  c.haptic_enabled = true;
  const ModelParams ph = InitParams(c, 16);
  EXPECT_NE(Predict(a, ph, c), Predict(b, ph, c));
}

TEST(Loss, PerfectPredictionAtPriorIsZero) {
  Tape tape(false);
  const Tensor x = Tensor::Full({10, 4}, 0.4);
  const Posterior post{Tensor::Zeros({1, 16}), Tensor::Zeros({1, 16})};
  const LossTerms l = Loss(tape, x, x, post, 10.0);
  EXPECT_EQ(l.total.item(), 0.0);
}

TEST(Loss, BetaZeroIsReconstructionOnly) {
  Tape tape(false);
  const Tensor a = Tensor::Full({3, 4}, 0.4), b = Tensor::Full({3, 4}, 0.1);
  const Posterior post{Tensor::Full({1, 2}, 0.5), Tensor::Full({1, 2}, 0.3)};
  const LossTerms l = Loss(tape, a, b, post, 0.0);
  EXPECT_EQ(l.total.item(), l.reconstruction.item());
  EXPECT_GT(l.kl.item(), 0.0);
}

TEST(Loss, ComponentsMatchIndependentOracle) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n(0, 1);
  std::vector<double> pred(12), target(12), mu(6), logvar(6);
  for (auto* v : {&pred, &target, &mu, &logvar}) {
    for (double& x : *v) x = n(rng);
  }
  double l1 = 0.0;
  for (std::size_t i = 0; i < 12; ++i) l1 += std::abs(pred[i] - target[i]);
  l1 /= 12;
  double kl = 0.0;
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t j = 0; j < 3; ++j) {
      const double m = mu[r * 3 + j], lv = logvar[r * 3 + j];
      kl += -0.5 * (1 + lv - m * m - std::exp(lv));
    }
  }
  kl /= 2;
  Tape tape(false);
  const LossTerms l = Loss(tape, Tensor::FromData({3, 4}, pred),
                           Tensor::FromData({3, 4}, target),
                           {Tensor::FromData({2, 3}, mu),
                            Tensor::FromData({2, 3}, logvar)},
                           10.0);
  EXPECT_NEAR(l.reconstruction.item(), l1, 1e-12);
  EXPECT_NEAR(l.kl.item(), kl, 1e-12);
  EXPECT_NEAR(l.total.item(), l1 + 10.0 * kl, 1e-12);
}

TEST(Batching, PaddingRepeatsFinalAction) {
  const demo::Episode& ep = SmallDataset().episodes[0];
  const std::size_t last = ep.length() - 1;
  const ActionChunk chunk = ChunkAt(ep, last, 10);
  for (const auto& a : chunk) {
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(a[j], ep.action(last)[j]);
  }
}

TEST(Batching, ChunkFromStartIsFirstActions) {
  const demo::Episode& ep = SmallDataset().episodes[1];
  ASSERT_GE(ep.length(), 10u);
  const ActionChunk chunk = ChunkAt(ep, 0, 10);
  for (std::size_t i = 0; i < 10; ++i) {
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(chunk[i][j], ep.action(i)[j]);
  }
}

TEST(Batching, SampledStepsAreUniform) {
  const demo::Dataset& ds = SmallDataset();
  std::vector<std::size_t> offset;
  std::size_t total = 0;
  for (const demo::Episode& ep : ds.episodes) {
    offset.push_back(total);
    total += ep.length();
  }
  std::vector<int> counts(total, 0);
  std::mt19937_64 rng(123);
  const int draws = 100000;
  for (int i = 0; i < draws / 1000; ++i) {
    for (const TrainingSample& s : SampleTrainingBatch(ds, 1, 1000, rng)) {
      ASSERT_LT(s.step, ds.episodes[s.episode].length());
      ++counts[offset[s.episode] + s.step];
    }
  }
  const double expected = double(draws) / double(total);
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  // Wilson-Hilferty upper 1% point for total - 1 degrees of freedom.
  const double dof = double(total - 1);
  const double q = 1 - 2 / (9 * dof) + 2.326348 * std::sqrt(2 / (9 * dof));
  EXPECT_LT(chi2, dof * q * q * q) << chi2 << " dof " << dof;
}

TEST(Batching, ObservationMatchesRecord) {
  std::mt19937_64 rng(4);
  const demo::Dataset& ds = SmallDataset();
  for (const TrainingSample& s : SampleTrainingBatch(ds, 10, 16, rng)) {
    EXPECT_EQ(s.observation, ds.episodes[s.episode].ObservationAt(s.step));
    EXPECT_EQ(s.target.size(), 10u);
  }
}

TEST(Batching, EmptyDatasetIsContractError) {
  std::mt19937_64 rng(1);
  ExpectCode(ErrorCode::kContract,
             [&] { SampleTrainingBatch(demo::Dataset{}, 10, 8, rng); });
}

TEST(Train, ZeroStepsReturnsInitialization) {
  PolicyConfig c = Tiny();
  c.train_steps = 0;
  const TrainResult r = Train(SmallDataset(), c);
  EXPECT_EQ(ParamsChecksum(r.params), ParamsChecksum(InitialParams(c)));
  EXPECT_TRUE(r.log.total.empty());
}

TEST(Train, DeterministicTraceAndChecksum) {
  PolicyConfig c;
  c.train_steps = 15;
  c.rng_seed = 8;
  const TrainResult a = Train(SmallDataset(), c);
  const TrainResult b = Train(SmallDataset(), c);
  EXPECT_EQ(a.log.total, b.log.total);
  EXPECT_EQ(a.log.params_checksum, b.log.params_checksum);
  c.rng_seed = 9;
  EXPECT_NE(Train(SmallDataset(), c).log.params_checksum,
            a.log.params_checksum);
}

TEST(Train, KlNonNegativeAndLossDrops) {
  PolicyConfig c;
  c.train_steps = 120;
  const TrainResult r = Train(SmallDataset(), c);
  for (double kl : r.log.kl) EXPECT_GE(kl, 0.0);
  for (const Tensor& t : r.params.All()) {
    for (double v : t.data()) ASSERT_TRUE(std::isfinite(v));
  }
  EXPECT_LT(r.log.FinalReconstruction(20), r.log.reconstruction.front());
}

TEST(Train, NonFiniteLossAbortsWithStep) {
  demo::Dataset ds = SmallDataset();
  for (demo::Episode& ep : ds.episodes) ep.actions[0] = std::nanf("");
  PolicyConfig c = Tiny();
  c.train_steps = 500;
  ExpectCode(ErrorCode::kNumeric, [&] { Train(ds, c); }, "step");
}

TEST(Train, FullObjectiveGradientCheck) {
  const PolicyConfig c;
  const ModelParams p = InitParams(c, 17);
  std::mt19937_64 rng(18);
  const auto batch = SampleTrainingBatch(SmallDataset(), 10, 4, rng);
  std::vector<env::Observation> obs;
  std::vector<double> chunks, proprio;
  for (const TrainingSample& s : batch) {
    obs.push_back(s.observation);
    for (const auto& a : s.target) chunks.insert(chunks.end(), a.begin(), a.end());
    proprio.insert(proprio.end(), s.observation.proprio.begin(),
                   s.observation.proprio.end());
  }
  const std::mt19937_64 latent_rng(19);
  const auto report = tensor::GradientCheck(
      [&](Tape& tape) {
        std::mt19937_64 r = latent_rng;
        const Tensor tokens = Tokenize(tape, obs, p, c);
        const Posterior post =
            CvaeEncode(tape, Tensor::FromData({4, 40}, chunks),
                       Tensor::FromData({4, 4}, proprio), p, c);
        const Tensor z = SampleLatent(tape, post, r);
        const Tensor pred = Forward(tape, tokens, z, p, c);
        return Loss(tape, pred, Tensor::FromData({40, 4}, chunks), post,
                    c.beta_kl)
            .total;
      },
      p.All(), {.n_probes = 64, .seed = 20});
  EXPECT_LE(report.max_rel_error, 1e-4);
}

TEST(Predict, ClampedAndDeterministic) {
  const PolicyConfig c;
  ModelParams p = InitParams(c, 22);
  for (double& v : p.head_b.data()) v = 3.0;  // push outputs above 1
  std::mt19937_64 rng(23);
  const env::Observation o = RandomObservation(rng);
  const ActionChunk a = Predict(o, p, c);
  EXPECT_EQ(a, Predict(o, p, c));
  ASSERT_EQ(a.size(), 10u);
  for (const auto& row : a) {
    for (double v : row) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Checkpoint, RoundTripIsBitExact) {
  PolicyConfig c;
  c.rng_seed = 99;
  c.haptic_enabled = false;
  const ModelParams p = InitParams(c, 24);
  const fs::path path = fs::temp_directory_path() / "hapchunk_ckpt.bin";
  SaveCheckpoint(path, c, p);
  const Checkpoint ck = LoadCheckpoint(path);
  EXPECT_EQ(ck.config, c);
  EXPECT_EQ(ParamsChecksum(ck.params), ParamsChecksum(p));
  EXPECT_EQ(EncodeCheckpoint(ck.config, ck.params), EncodeCheckpoint(c, p));
  fs::remove(path);
}

TEST(Checkpoint, HeaderAndErrors) {
  const PolicyConfig c = Tiny();
  std::string bytes = EncodeCheckpoint(c, InitParams(c, 1));
  EXPECT_EQ(bytes.substr(0, 4), "HIAM");
  EXPECT_EQ(bytes[4], 1);
  ExpectCode(ErrorCode::kTruncated,
             [&] { DecodeCheckpoint(bytes.substr(0, bytes.size() - 3)); });
  std::string bad = bytes;
  bad[4] = 7;
  ExpectCode(ErrorCode::kVersionMismatch, [&] { DecodeCheckpoint(bad); });
  bad = bytes;
  bad[0] = 'X';
  ExpectCode(ErrorCode::kFormat, [&] { DecodeCheckpoint(bad); });
  ExpectCode(ErrorCode::kFormat, [&] { DecodeCheckpoint(bytes + "!"); });
  for (std::size_t at : {std::size_t{20}, bytes.size() / 2, bytes.size() - 1}) {
    bad = bytes;
    bad[at] ^= 0x10;
    ExpectCode(ErrorCode::kChecksumMismatch, [&] { DecodeCheckpoint(bad); });
  }
  ExpectCode(ErrorCode::kIo, [] { LoadCheckpoint("/nonexistent/ckpt.bin"); });
}

}  // namespace
}  // namespace hapchunk::policy
