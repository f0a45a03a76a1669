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

// Acceptance run: prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails. Optional argv[1]: artifact directory.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "hapchunk/control/chunk_buffer.h"
#include "hapchunk/control/rollout.h"
#include "hapchunk/demo/dataset.h"
#include "hapchunk/env/env.h"
#include "hapchunk/error.h"
#include "hapchunk/harness/experiment.h"
#include "hapchunk/harness/report.h"
#include "hapchunk/policy/checkpoint.h"
#include "hapchunk/policy/model.h"
#include "hapchunk/policy/train.h"
#include "hapchunk/tensor/grad_check.h"
#include "hapchunk/tensor/ops.h"
#include "unit/finite_diff.h"

namespace fs = std::filesystem;
using namespace hapchunk;
using tensor::Tape;
using tensor::Tensor;

namespace {

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string Format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

// ---- 1: gradient fidelity -------------------------------------------------

Tensor Project(Tape& tape, const Tensor& y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Tensor w = testing::RandomTensor(y.shape(), rng, -1, 1, false);
  return tensor::Sum(tape, tensor::Mul(tape, y, w));
}

double PrimitiveError(const std::function<Tensor(Tape&)>& f,
                      const std::vector<Tensor>& inputs) {
  double worst = 0.0;
  for (const Tensor& x : inputs) {
    worst = std::max(worst, testing::MaxRelError(testing::AnalyticGrad(f, x),
                                                 testing::CentralDifferences(f, x)));
  }
  return worst;
}

double WorstPrimitiveError() {
  std::mt19937_64 rng(101);
  auto R = [&](tensor::Shape s, double lo = -1, double hi = 1) {
    return testing::RandomTensor(std::move(s), rng, lo, hi);
  };
  // L1 and clamp are kept away from their kinks.
  Tensor a = R({3, 4}), b = R({4, 5}), c = R({3, 4}), bias = R({4});
  Tensor pos = R({3, 4}, 0.2, 1.0), target = R({3, 4}, -3.0, -2.0);
  Tensor inside = R({3, 4}, -0.8, 0.8), gain = R({4}), shift = R({4});
  Tensor mu = R({2, 3}), logvar = R({2, 3});
  const std::vector<std::size_t> rows = {2, 0, 2, 1};
  Tensor q = R({6, 4}), k = R({6, 4}), v = R({6, 4});
  tensor::AttentionWeights w{R({4, 4}), R({4}), R({4, 4}), R({4, 4}), R({4}),
                             R({4, 4}), R({4})};
  const tensor::AttentionLayout layout{2, 2, nullptr};
  struct Case {
    std::function<Tensor(Tape&)> f;
    std::vector<Tensor> inputs;
  };
  const std::vector<Case> cases = {
      {[&](Tape& t) { return Project(t, tensor::MatMul(t, a, b), 1); }, {a, b}},
      {[&](Tape& t) { return Project(t, tensor::Add(t, a, c), 2); }, {a, c}},
      {[&](Tape& t) { return Project(t, tensor::Sub(t, a, c), 3); }, {a, c}},
      {[&](Tape& t) { return Project(t, tensor::Mul(t, a, c), 4); }, {a, c}},
      {[&](Tape& t) { return Project(t, tensor::AddBias(t, a, bias), 5); },
       {a, bias}},
      {[&](Tape& t) { return Project(t, tensor::Scale(t, a, -1.7), 6); }, {a}},
      {[&](Tape& t) { return Project(t, tensor::Exp(t, a), 7); }, {a}},
      {[&](Tape& t) { return Project(t, tensor::Gelu(t, a), 8); }, {a}},
      {[&](Tape& t) { return Project(t, tensor::Clamp(t, inside, -1, 1), 9); },
       {inside}},
      {[&](Tape& t) { return Project(t, tensor::Softmax(t, a, 1), 10); }, {a}},
      {[&](Tape& t) { return Project(t, tensor::Softmax(t, a, 0), 11); }, {a}},
      {[&](Tape& t) {
         return Project(t, tensor::LayerNorm(t, a, gain, shift), 12);
       },
       {a, gain, shift}},
      {[&](Tape& t) { return tensor::L1Loss(t, pos, target); }, {pos}},
      {[&](Tape& t) { return tensor::KlGaussian(t, mu, logvar); },
       {mu, logvar}},
      {[&](Tape& t) {
         return Project(t, tensor::GatherRows(t, a, rows), 13);
       },
       {a}},
      {[&](Tape& t) {
         return Project(t, tensor::ConcatRows(t, {a, c}), 14);
       },
       {a, c}},
      {[&](Tape& t) { return Project(t, tensor::TileRows(t, a, 2), 15); },
       {a}},
      {[&](Tape& t) {
         return Project(t, tensor::ScaledDotProductAttention(t, q, k, v, layout),
                        16);
       },
       {q, k, v}},
      {[&](Tape& t) {
         return Project(t, tensor::MultiHeadAttention(t, q, k, w, layout), 17);
       },
       {q, k, w.wq, w.bq, w.wk, w.wv, w.bv, w.wo, w.bo}},
  };
  double worst = 0.0;
  for (const Case& cs : cases) worst = std::max(worst, PrimitiveError(cs.f, cs.inputs));
  return worst;
}

Verdict GradientFidelity(const demo::Dataset& dataset) {
  const auto start = Clock::now();
  const double primitive = WorstPrimitiveError();
  const policy::PolicyConfig cfg;
  const policy::ModelParams params = policy::InitialParams(cfg);
  std::mt19937_64 rng(7);
  const auto batch =
      policy::SampleTrainingBatch(dataset, cfg.chunk_k, cfg.batch_size, rng);
  const std::size_t n = batch.size(), width = policy::kActionDim * cfg.chunk_k;
  std::vector<env::Observation> obs;
  std::vector<double> chunks, proprio;
  for (const policy::TrainingSample& s : batch) {
    obs.push_back(s.observation);
    for (const auto& row : s.target) chunks.insert(chunks.end(), row.begin(), row.end());
    proprio.insert(proprio.end(), s.observation.proprio.begin(),
                   s.observation.proprio.end());
  }
  const std::mt19937_64 latent_rng(8);
  const auto report = tensor::GradientCheck(
      [&](Tape& tape) {
        std::mt19937_64 r = latent_rng;
        const Tensor tokens = policy::Tokenize(tape, obs, params, cfg);
        const policy::Posterior post = policy::CvaeEncode(
            tape, Tensor::FromData({n, width}, chunks),
            Tensor::FromData({n, 4}, proprio), params, cfg);
        const Tensor z = policy::SampleLatent(tape, post, r);
        const Tensor pred = policy::Forward(tape, tokens, z, params, cfg);
        return policy::Loss(tape, pred,
                            Tensor::FromData({n * cfg.chunk_k, 4}, chunks),
                            post, cfg.beta_kl)
            .total;
      },
      params.All(), {.h = 1e-5, .n_probes = 64, .seed = 9});
  const double secs = Seconds(start);
  return {report.max_rel_error <= 1e-4 && primitive <= 1e-6 && secs <= 60.0,
          Format("full objective max rel err %.2e over %zu probes (<= 1e-4), "
                 "primitives %.2e (<= 1e-6), %.1f s",
                 report.max_rel_error, report.probes.size(), primitive, secs)};
}

// ---- 2: ensembling oracle ------------------------------------------------

Verdict EnsemblingOracle() {
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> u(0.0, 1.0), mdist(0.0, 1.0);
  std::uniform_int_distribution<int> kdist(1, 12), pdist(1, 20);
  auto chunk = [&](std::size_t k) {
    policy::ActionChunk c(k);
    for (auto& row : c) {
      for (double& v : row) v = u(rng);
    }
    return c;
  };
  double worst = 0.0;
  bool identity = true, mean_exact = true;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = static_cast<std::size_t>(kdist(rng));
    control::ChunkBuffer buf(k);
    const int pushes = pdist(rng);
    for (int t = 0; t < pushes; ++t) buf.Push(t, chunk(k));
    const std::int64_t t = pushes - 1 + static_cast<std::int64_t>(rng() % k);
    const double m = mdist(rng);
    const bool oldest = trial % 2 == 0;
    std::vector<control::Prediction> preds = buf.At(t);
    std::sort(preds.begin(), preds.end(), [](const auto& x, const auto& y) {
      return x.predicted_at < y.predicted_at;
    });
    if (!oldest) std::reverse(preds.begin(), preds.end());
    std::array<double, 4> num{};
    double den = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      const double w = std::exp(-m * static_cast<double>(i));
      den += w;
      for (int j = 0; j < 4; ++j) num[j] += w * preds[i].action[j];
    }
    const env::Action got = control::EnsembledAction(
        buf, t,
        {m, oldest ? control::EnsembleOrientation::kOldestFirst
                   : control::EnsembleOrientation::kNewestFirst});
    for (int j = 0; j < 4; ++j) {
      worst = std::max(worst, std::abs(got.target[j] - num[j] / den));
    }
    // m = 0 is the arithmetic mean.
    const env::Action mean = control::EnsembledAction(buf, t, {0.0});
    const auto& in_order = buf.At(t);
    for (int j = 0; j < 4; ++j) {
      double s = 0.0;
      for (const auto& p : in_order) s += p.action[j];
      mean_exact &= mean.target[j] == s / static_cast<double>(in_order.size());
    }
  }
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = static_cast<std::size_t>(kdist(rng));
    control::ChunkBuffer buf(k);
    const policy::ActionChunk c = chunk(k);
    buf.Push(trial, c);
    for (std::size_t i = 0; i < k; ++i) {
      identity &= control::EnsembledAction(buf, trial + static_cast<std::int64_t>(i))
                      .target == c[i];
    }
  }
  return {worst <= 1e-12 && identity && mean_exact,
          Format("max |ensembled - brute force| %.2e over 1000 buffers "
                 "(<= 1e-12); single prediction identity %s; m=0 mean %s",
                 worst, identity ? "exact" : "NOT exact",
                 mean_exact ? "exact" : "NOT exact")};
}

// ---- 3: expert soundness -------------------------------------------------

Verdict ExpertSoundness(std::uint64_t eval_seed, const demo::Dataset& dataset) {
  int clean = 0, slippery = 0, forced_ok = 0, forced = 0;
  std::vector<int> failed;
  for (int i = 0; i < 100; ++i) {
    env::EnvConfig c;
    c.rng_seed = harness::TrialSeed(eval_seed, i);
    c.p_slip = 0.0;
    control::ExpertSource a;
    clean += control::Rollout(c, a).delivery_success;
    c.p_slip = 0.5;
    control::ExpertSource b;
    const control::TrialResult r = control::Rollout(c, b);
    slippery += r.delivery_success;
    if (!r.delivery_success) failed.push_back(i);
    c.p_slip = 0.0;
    const demo::Episode ep = demo::GenerateEpisode(c, true);
    ++forced;
    forced_ok += ep.grasp_attempts >= 2 && ep.is_recovery;
  }
  for (const demo::Episode& ep : dataset.episodes) {
    if (!ep.is_recovery) continue;
    ++forced;
    forced_ok += ep.grasp_attempts >= 2;
  }
  std::string which;
  for (int i : failed) which += " " + std::to_string(i);
  return {clean == 100 && slippery == 100 && forced_ok == forced,
          Format("delivery %d/100 at p_slip=0, %d/100 at p_slip=0.5%s%s; "
                 "forced-slip episodes with >= 2 attempts %d/%d",
                 clean, slippery, failed.empty() ? "" : " (failed trials:",
                 failed.empty() ? "" : (which + ")").c_str(), forced_ok,
                 forced)};
}

// ---- 4: haptic necessity -------------------------------------------------

Verdict HapticNecessity(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int identical = 0;
  double min_gap = 1e9;
  for (int i = 0; i < 100; ++i) {
    env::EnvConfig c;
    c.rng_seed = rng();
    env::EnvState empty = env::Reset(c).state;
    const std::size_t k =
        std::min(empty.seeds.size() - 1,
                 static_cast<std::size_t>(u(rng) * empty.seeds.size()));
    empty.gripper.x = empty.seeds[k].x;
    empty.gripper.y = empty.seeds[k].y;
    empty.gripper.z = 0.5 * u(rng);
    empty.gripper.g = 0.1 * u(rng);
    env::EnvState held = empty;
    held.held_seed = k;
    held.seeds[k].location = env::SeedLocation::kHeld;
    identical += env::RenderImage(held) == env::RenderImage(empty);
    min_gap = std::min(min_gap, std::abs(env::ExpectedForce(held)[2] -
                                         env::ExpectedForce(empty)[2]));
  }
  return {identical == 100 && min_gap >= 0.5,
          Format("pixel-identical images %d/100, min expected |f_z| gap %.4f "
                 "(>= 0.5)",
                 identical, min_gap)};
}

// ---- 5-8 -----------------------------------------------------------------

struct Run {
  harness::GridOutcome grid;
  harness::ResultsTable generalization;
  double grid_seconds = 0.0;
};

Run RunExperiment(const harness::ExperimentConfig& config,
                  const fs::path& out) {
  Run run;
  const auto start = Clock::now();
  run.grid = harness::RunGrid(config, [](std::string_view m) {
    std::fprintf(stderr, "  %.*s\n", static_cast<int>(m.size()), m.data());
  });
  run.grid_seconds = Seconds(start);
  const harness::TrainedCondition& model = run.grid.models.front();
  run.generalization = harness::RunGeneralization(
      model.params, model.spec.policy, harness::DefaultVariants(), config);
  std::map<int, control::Trace> traces;
  for (int i : harness::SelectTraceTrials(run.grid.traces)) {
    traces[i] = run.grid.traces[i];
  }
  harness::EmitReport(out, run.grid.table, run.generalization, traces);
  fs::create_directories(out / "models");
  for (const harness::TrainedCondition& m : run.grid.models) {
    policy::SaveCheckpoint(out / "models" / (m.spec.label + ".hiam"),
                           m.spec.policy, m.params);
  }
  return run;
}

Verdict TableOrdering(const Run& run) {
  const harness::ResultsTable& t = run.grid.table;
  const auto& hr = t.Find("haptic_recovery");
  const auto& hn = t.Find("haptic_no_recovery");
  const auto& nr = t.Find("no_haptic_recovery");
  const auto& nn = t.Find("no_haptic_no_recovery");
  const double gap = hr.delivery_rate() - nr.delivery_rate();
  const bool ok = gap >= 0.10 - 1e-12 &&
                  hr.delivery_rate() >= hn.delivery_rate() &&
                  nr.delivery_rate() >= nn.delivery_rate() &&
                  run.grid_seconds <= 1800.0;
  return {ok, Format("delivery haptic+rec %d/%d, haptic %d/%d, no-haptic+rec "
                     "%d/%d, no-haptic %d/%d; haptic gap %+.0f points (>= 10); "
                     "grid %.0f s (<= 1800)",
                     hr.deliveries, hr.trials, hn.deliveries, hn.trials,
                     nr.deliveries, nr.trials, nn.deliveries, nn.trials,
                     100.0 * gap, run.grid_seconds)};
}

Verdict ForcePhenomenon(const Run& run) {
  const auto& almond = run.generalization.Find("almond");
  const auto& control = run.generalization.Find("control");
  return {almond.loop_failure_rate() > control.loop_failure_rate(),
          Format("loop failures almond %d/%d vs control %d/%d (must be "
                 "strictly greater); almond pick %d, delivery %d",
                 almond.loop_failures, almond.trials, control.loop_failures,
                 control.trials, almond.picks, almond.deliveries)};
}

bool SameFiles(const fs::path& a, const fs::path& b, std::string& why) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), a));
  }
  std::size_t count_b = 0;
  for (const auto& e : fs::recursive_directory_iterator(b)) {
    count_b += e.is_regular_file();
  }
  if (files.size() != count_b) {
    why = "file counts differ";
    return false;
  }
  for (const fs::path& f : files) {
    if (!fs::exists(b / f) ||
        harness::ReadTextFile(a / f) != harness::ReadTextFile(b / f)) {
      why = f.string() + " differs";
      return false;
    }
  }
  return true;
}

template <typename Fn>
bool Throws(ErrorCode code, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code() == code;
  }
  return false;
}

Verdict Persistence(const harness::ExperimentConfig& config,
                    const demo::Dataset& dataset, const fs::path& root,
                    const fs::path& run_a) {
  std::string why;
  bool ok = true;
  // Dataset: rebuilt and saved twice, then reloaded and corrupted.
  const harness::SeedPlan seeds = harness::SeedPlan::FromMaster(config.master_seed);
  const demo::Dataset again =
      demo::BuildDataset(config.profile.n_success, config.profile.n_recovery,
                         seeds.dataset, config.env);
  demo::SaveDataset(dataset, root / "dataset_a");
  demo::SaveDataset(again, root / "dataset_b");
  const bool datasets = SameFiles(root / "dataset_a", root / "dataset_b", why);
  ok &= datasets;
  const demo::Dataset loaded = demo::LoadDataset(root / "dataset_a");
  bool lossless = loaded.episodes.size() == dataset.episodes.size();
  for (std::size_t i = 0; lossless && i < loaded.episodes.size(); ++i) {
    lossless = loaded.episodes[i] == dataset.episodes[i];
  }
  fs::copy(root / "dataset_a", root / "dataset_bad",
           fs::copy_options::recursive | fs::copy_options::overwrite_existing);
  {
    const fs::path ep = root / "dataset_bad" / "episode_0003.bin";
    std::string bytes = harness::ReadTextFile(ep);
    bytes[bytes.size() / 2] ^= 0x01;
    harness::WriteTextFile(ep, bytes);
  }
  const bool dataset_crc = Throws(ErrorCode::kChecksumMismatch, [&] {
    demo::LoadDataset(root / "dataset_bad");
  });

  // Full second run with the same master seed.
  std::fprintf(stderr, "  repeating the experiment for byte comparison\n");
  RunExperiment(config, root / "run_b");
  std::string run_why;
  const bool runs = SameFiles(run_a, root / "run_b", run_why);

  // Checkpoint round trip and corruption.
  const fs::path ckpt = run_a / "models" / "haptic_recovery.hiam";
  const std::string bytes = harness::ReadTextFile(ckpt);
  const policy::Checkpoint ck = policy::LoadCheckpoint(ckpt);
  const bool ckpt_lossless =
      policy::EncodeCheckpoint(ck.config, ck.params) == bytes;
  std::string bad = bytes;
  bad[bad.size() / 2] ^= 0x01;
  const bool ckpt_crc = Throws(ErrorCode::kChecksumMismatch,
                               [&] { policy::DecodeCheckpoint(bad); });

  ok &= lossless && dataset_crc && runs && ckpt_lossless && ckpt_crc;
  return {ok,
          Format("datasets %s, dataset round trip %s, corrupted episode %s; "
                 "repeat run (CSVs, report, traces, checkpoints) %s; "
                 "checkpoint round trip %s, corrupted checkpoint %s",
                 datasets ? "identical" : ("differ: " + why).c_str(),
                 lossless ? "lossless" : "LOSSY",
                 dataset_crc ? "rejected" : "NOT rejected",
                 runs ? "identical" : ("differs: " + run_why).c_str(),
                 ckpt_lossless ? "lossless" : "LOSSY",
                 ckpt_crc ? "rejected" : "NOT rejected")};
}

Verdict TrainingSanity(const Run& run) {
  const policy::TrainLog& log = run.grid.models.front().log;
  const double l1 = log.FinalReconstruction();
  const double min_kl = *std::min_element(log.kl.begin(), log.kl.end());
  return {l1 < 0.05 && min_kl >= 0.0 && log.total.size() <= 3000 &&
              log.wall_seconds <= 600.0,
          Format("final train L1 %.4f (< 0.05, mean of last 100 of %zu steps), "
                 "min KL %.3e (>= 0), %.1f s (<= 600)",
                 l1, log.total.size(), min_kl, log.wall_seconds)};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path root =
      argc > 1 ? fs::path(argv[1])
               : fs::temp_directory_path() / "hapchunk_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);

  harness::ExperimentConfig config;  // master seed 2026, x4 profile
  config.env.p_slip = 0.3;
  const harness::SeedPlan seeds = harness::SeedPlan::FromMaster(config.master_seed);
  std::map<int, Verdict> verdicts;
  const char* names[] = {"",
                         "gradient fidelity",
                         "ensembling oracle",
                         "expert soundness",
                         "haptic necessity",
                         "condition ordering",
                         "out-of-distribution force",
                         "determinism and persistence",
                         "training sanity"};
  try {
    std::fprintf(stderr, "building the default dataset\n");
    const demo::Dataset dataset =
        demo::BuildDataset(config.profile.n_success, config.profile.n_recovery,
                           seeds.dataset, config.env);
    verdicts[1] = GradientFidelity(dataset);
    verdicts[2] = EnsemblingOracle();
    verdicts[3] = ExpertSoundness(seeds.evaluation, dataset);
    verdicts[4] = HapticNecessity(seeds.evaluation);
    std::fprintf(stderr, "running the condition grid\n");
    const Run run = RunExperiment(config, root / "run_a");
    verdicts[5] = TableOrdering(run);
    verdicts[6] = ForcePhenomenon(run);
    verdicts[8] = TrainingSanity(run);
    verdicts[7] = Persistence(config, dataset, root, root / "run_a");
    std::fprintf(stderr, "\n%s\n",
                 harness::ReadTextFile(root / "run_a" / "report.md").c_str());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "acceptance run aborted: %s\n", e.what());
  }

  bool all = true;
  for (int i = 1; i <= 8; ++i) {
    const auto it = verdicts.find(i);
    const bool pass = it != verdicts.end() && it->second.pass;
    all &= pass;
    std::printf("criterion %d %s: %s: %s\n", i, pass ? "PASS" : "FAIL",
                names[i],
                it == verdicts.end() ? "not evaluated" : it->second.detail.c_str());
  }
  std::fflush(stdout);
  return all ? 0 : 1;
}
