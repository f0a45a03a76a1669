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

// hapchunk: dataset collection, training, evaluation and reports.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hapchunk/demo/dataset.h"
#include "hapchunk/error.h"
#include "hapchunk/harness/config.h"
#include "hapchunk/harness/experiment.h"
#include "hapchunk/harness/report.h"
#include "hapchunk/policy/checkpoint.h"
#include "hapchunk/policy/train.h"
#include "hapchunk/seeding.h"

namespace fs = std::filesystem;
using namespace hapchunk;

namespace {

void Log(std::string_view message) {
  std::fprintf(stderr, "%.*s\n", static_cast<int>(message.size()),
               message.data());
}

harness::ExperimentConfig LoadConfig(const std::string& path) {
  harness::ExperimentConfig config;
  config.env.p_slip = 0.3;
  if (!path.empty()) {
    harness::ApplyKeyValues(harness::ReadKeyValueFile(path), config);
  }
  return config;
}

void MakeDir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw Error(ErrorCode::kIo,
                "cannot create " + dir.string() + ": " + ec.message());
  }
}

std::map<int, control::Trace> PickTraces(
    const std::vector<control::Trace>& traces) {
  std::map<int, control::Trace> out;
  for (int i : harness::SelectTraceTrials(traces)) out[i] = traces[i];
  return out;
}

void WriteLossCsv(const fs::path& path, const policy::TrainLog& log) {
  std::string csv = "step,total,reconstruction,kl\n";
  char buf[128];
  for (std::size_t i = 0; i < log.total.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f\n", i, log.total[i],
                  log.reconstruction[i], log.kl[i]);
    csv += buf;
  }
  harness::WriteTextFile(path, csv);
}

std::vector<int> ParseCounts(const std::string& list) {
  std::vector<int> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kConfiguration,
                  "--recovery-sweep expects comma-separated integers, got '" +
                      item + "'");
    }
  }
  return out;
}

struct CollectArgs {
  int n_success = harness::kDefaultProfile.n_success;
  int n_recovery = harness::kDefaultProfile.n_recovery;
  std::uint64_t seed = 2026;
  std::string config, out;
};

struct TrainArgs {
  std::string dataset, config, out, log;
  std::optional<bool> haptic;
  std::optional<std::uint64_t> seed;
};

struct EvalArgs {
  std::string model, config, out;
  std::optional<int> trials;
  std::optional<double> p_slip;
  std::optional<std::uint64_t> seed;
};

struct GridArgs {
  std::string config, out, sweep;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  bool paper_profile = false;
  bool skip_generalization = false;
};

struct GeneralizeArgs {
  std::string model, config, out;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
};

int Collect(const CollectArgs& a) {
  const harness::ExperimentConfig config = LoadConfig(a.config);
  const demo::Dataset ds =
      demo::BuildDataset(a.n_success, a.n_recovery, a.seed, config.env);
  demo::SaveDataset(ds, a.out);
  std::fprintf(stderr, "wrote %zu episodes (%d recovery, %d discards) to %s\n",
               ds.episodes.size(), a.n_recovery, ds.manifest.total_discards,
               a.out.c_str());
  return 0;
}

int Train(const TrainArgs& a) {
  harness::ExperimentConfig config = LoadConfig(a.config);
  if (a.haptic) config.policy.haptic_enabled = *a.haptic;
  if (a.seed) config.policy.rng_seed = *a.seed;
  const demo::Dataset ds = demo::LoadDataset(a.dataset);
  const policy::TrainResult r = policy::Train(
      ds, config.policy, [&](std::size_t step, double total, double rec, double kl) {
        if ((step + 1) % 500 == 0) {
          std::fprintf(stderr, "step %zu: loss %.6f, l1 %.6f, kl %.6f\n",
                       step + 1, total, rec, kl);
        }
      });
  policy::SaveCheckpoint(a.out, config.policy, r.params);
  if (!a.log.empty()) WriteLossCsv(a.log, r.log);
  std::fprintf(stderr,
               "final reconstruction %.6f in %.1f s, checksum %s -> %s\n",
               r.log.FinalReconstruction(), r.log.wall_seconds,
               r.log.params_checksum.c_str(), a.out.c_str());
  return 0;
}

int Eval(const EvalArgs& a) {
  harness::ExperimentConfig config = LoadConfig(a.config);
  if (a.trials) config.n_eval_trials = *a.trials;
  if (a.p_slip) config.env.p_slip = *a.p_slip;
  if (a.seed) config.master_seed = *a.seed;
  config.Validate();
  const policy::Checkpoint ck = policy::LoadCheckpoint(a.model);
  const harness::EvalSpec spec{
      config.env, config.n_eval_trials,
      harness::SeedPlan::FromMaster(config.master_seed).evaluation,
      config.ensemble};
  std::vector<control::Trace> traces;
  harness::ResultRow row =
      harness::Evaluate("eval", ck.params, ck.config, spec, &traces);
  MakeDir(a.out);
  harness::WriteTextFile(fs::path(a.out) / "eval.csv",
                         harness::GridCsv({{row}}));
  for (const auto& [trial, trace] : PickTraces(traces)) {
    control::WriteTraceCsv(
        fs::path(a.out) / ("force_trace_" + std::to_string(trial) + ".csv"),
        trace);
  }
  std::fprintf(stderr, "pick %d, delivery %d, loop failures %d of %d\n",
               row.picks, row.deliveries, row.loop_failures, row.trials);
  return 0;
}

int Grid(const GridArgs& a) {
  harness::ExperimentConfig config = LoadConfig(a.config);
  if (a.seed) config.master_seed = *a.seed;
  if (a.trials) config.n_eval_trials = *a.trials;
  if (a.paper_profile) config.profile = harness::kPaperProfile;
  const fs::path out(a.out);
  MakeDir(out / "models");
  harness::WriteTextFile(out / "config.txt", harness::FormatKeyValues(config));

  harness::GridOutcome grid = harness::RunGrid(config, Log);
  for (const harness::TrainedCondition& m : grid.models) {
    policy::SaveCheckpoint(out / "models" / (m.spec.label + ".hiam"),
                           m.spec.policy, m.params);
  }
  harness::ResultsTable gen;
  if (!a.skip_generalization) {
    const harness::TrainedCondition& best = grid.models.front();
    gen = harness::RunGeneralization(best.params, best.spec.policy,
                                     harness::DefaultVariants(), config);
  }
  harness::EmitReport(out, grid.table, gen, PickTraces(grid.traces));
  if (!a.sweep.empty()) {
    const harness::ResultsTable sweep =
        harness::RunRecoverySweep(config, ParseCounts(a.sweep), Log);
    harness::WriteTextFile(out / "sweep.csv", harness::GridCsv(sweep));
  }
  std::fputs(harness::ReadTextFile(out / "report.md").c_str(), stdout);
  return 0;
}

int Generalize(const GeneralizeArgs& a) {
  harness::ExperimentConfig config = LoadConfig(a.config);
  if (a.seed) config.master_seed = *a.seed;
  if (a.trials) config.n_eval_trials = *a.trials;
  config.Validate();
  const policy::Checkpoint ck = policy::LoadCheckpoint(a.model);
  const harness::ResultsTable gen = harness::RunGeneralization(
      ck.params, ck.config, harness::DefaultVariants(), config);
  const fs::path out(a.out);
  MakeDir(out);
  harness::WriteTextFile(out / "generalization.csv",
                         harness::GeneralizationCsv(gen));
  if (fs::exists(out / "grid.csv")) {
    harness::WriteTextFile(out / "report.md", harness::RegenerateReport(out));
  }
  for (const harness::ResultRow& r : gen.rows) {
    std::fprintf(stderr, "%s: pick %d, delivery %d, loop failures %d of %d\n",
                 r.label.c_str(), r.picks, r.deliveries, r.loop_failures,
                 r.trials);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Haptic-informed action chunking: data, training, evaluation"};
  app.require_subcommand(1);

  CollectArgs collect;
  auto* c = app.add_subcommand("collect", "Generate a demonstration dataset");
  c->add_option("--n-success", collect.n_success, "Clean demonstrations")
      ->capture_default_str();
  c->add_option("--n-recovery", collect.n_recovery,
                "Staged-failure demonstrations")
      ->capture_default_str();
  c->add_option("--seed", collect.seed, "Base seed")->capture_default_str();
  c->add_option("--config", collect.config, "Key-value config file");
  c->add_option("--out", collect.out, "Output directory")->required();

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a policy on a dataset");
  t->add_option("--dataset", train.dataset, "Dataset directory")->required();
  t->add_flag("--haptic,!--no-haptic", train.haptic,
              "Enable or disable the force token");
  t->add_option("--config", train.config, "Key-value config file");
  t->add_option("--seed", train.seed, "Training seed");
  t->add_option("--log", train.log, "Write the per-step loss CSV here");
  t->add_option("--out", train.out, "Checkpoint path")->required();

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint");
  e->add_option("--model", eval.model, "Checkpoint path")->required();
  e->add_option("--trials", eval.trials, "Number of trials (default 100)");
  e->add_option("--p-slip", eval.p_slip, "Slip probability (default 0.3)");
  e->add_option("--seed", eval.seed, "Master seed (default 2026)");
  e->add_option("--config", eval.config, "Key-value config file");
  e->add_option("--out", eval.out, "Output directory")->required();

  GridArgs grid;
  auto* g = app.add_subcommand("grid", "Train and evaluate the 2x2 grid");
  g->add_option("--seed", grid.seed, "Master seed (default 2026)");
  g->add_option("--trials", grid.trials, "Trials per condition (default 100)");
  g->add_flag("--paper-profile", grid.paper_profile,
              "Use 40 clean + 10 recovery episodes");
  g->add_flag("--skip-generalization", grid.skip_generalization,
              "Do not evaluate the novel objects");
  g->add_option("--recovery-sweep", grid.sweep,
                "Also train haptic models with these recovery counts, e.g. "
                "0,20,40,80");
  g->add_option("--config", grid.config, "Key-value config file");
  g->add_option("--out", grid.out, "Output directory")->required();

  GeneralizeArgs gen;
  auto* n = app.add_subcommand("generalize", "Evaluate on novel objects");
  n->add_option("--model", gen.model, "Checkpoint path")->required();
  n->add_option("--seed", gen.seed, "Master seed (default 2026)");
  n->add_option("--trials", gen.trials, "Trials per variant (default 100)");
  n->add_option("--config", gen.config, "Key-value config file");
  n->add_option("--out", gen.out, "Output directory")->required();

  std::string report_in, report_out;
  auto* r = app.add_subcommand("report", "Rebuild report.md from CSVs");
  r->add_option("--in", report_in, "Directory holding grid.csv")->required();
  r->add_option("--out", report_out, "Report path (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*c) return Collect(collect);
    if (*t) return Train(train);
    if (*e) return Eval(eval);
    if (*g) return Grid(grid);
    if (*n) return Generalize(gen);
    if (*r) {
      const std::string md = harness::RegenerateReport(report_in);
      if (report_out.empty()) {
        std::fputs(md.c_str(), stdout);
      } else {
        harness::WriteTextFile(report_out, md);
      }
      return 0;
    }
  } catch (const Error& err) {
    std::fprintf(stderr, "error (%s): %s\n",
                 std::string(ErrorCodeName(err.code())).c_str(), err.what());
    return static_cast<int>(err.code());
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 1;
  }
  return 0;
}
