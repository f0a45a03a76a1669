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

#include "hapchunk/harness/report.h"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>

#include "hapchunk/error.h"

namespace hapchunk::harness {
namespace {

constexpr std::string_view kCounts =
    "trials,picks,deliveries,loop_failures,grasp_attempts,pick_rate,"
    "delivery_rate,mean_grasp_attempts,loop_failure_rate,eval_seed";
const std::string kGridHeader =
    "condition,haptic,recovery_samples," + std::string(kCounts);
const std::string kGeneralizationHeader =
    "variant,size_multiplier,contrast," + std::string(kCounts);

std::string Fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string CountColumns(const ResultRow& r) {
  return std::to_string(r.trials) + "," + std::to_string(r.picks) + "," +
         std::to_string(r.deliveries) + "," + std::to_string(r.loop_failures) +
         "," + std::to_string(r.grasp_attempts) + "," + Fixed(r.pick_rate()) +
         "," + Fixed(r.delivery_rate()) + "," +
         Fixed(r.mean_grasp_attempts()) + "," + Fixed(r.loop_failure_rate()) +
         "," + std::to_string(r.eval_seed);
}

std::vector<std::string_view> Lines(std::string_view text) {
  std::vector<std::string_view> out;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    out.push_back(text.substr(0, nl));
    if (nl == std::string_view::npos) break;
    text = text.substr(nl + 1);
  }
  return out;
}

std::vector<std::string> Fields(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.emplace_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
T Number(const std::string& s, std::size_t line) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::kFormat, "csv line " + std::to_string(line) +
                                        ": bad number '" + s + "'");
  }
  return v;
}

bool Flag(const std::string& s, std::size_t line) {
  if (s == "1") return true;
  if (s == "0") return false;
  throw Error(ErrorCode::kFormat,
              "csv line " + std::to_string(line) + ": bad flag '" + s + "'");
}

// Parses the count columns starting at field 3; the derived rate columns
// are checked against the counts.
void ParseCounts(const std::vector<std::string>& f, std::size_t line,
                 ResultRow& r) {
  r.trials = Number<int>(f[3], line);
  r.picks = Number<int>(f[4], line);
  r.deliveries = Number<int>(f[5], line);
  r.loop_failures = Number<int>(f[6], line);
  r.grasp_attempts = Number<long>(f[7], line);
  r.eval_seed = Number<std::uint64_t>(f[12], line);
  const std::string expect = CountColumns(r);
  std::string got = f[3];
  for (std::size_t i = 4; i < f.size(); ++i) got += "," + f[i];
  if (got != expect) {
    throw Error(ErrorCode::kFormat, "csv line " + std::to_string(line) +
                                        ": rates disagree with counts");
  }
}

template <typename RowFn>
ResultsTable Parse(std::string_view text, const std::string& header,
                   RowFn&& row_fn) {
  const auto lines = Lines(text);
  if (lines.empty() || lines[0] != header) {
    throw Error(ErrorCode::kFormat, "csv header is not '" + header + "'");
  }
  ResultsTable table;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = Fields(lines[i]);
    if (f.size() != 13) {
      throw Error(ErrorCode::kFormat, "csv line " + std::to_string(i + 1) +
                                          ": expected 13 fields");
    }
    ResultRow r;
    r.label = f[0];
    row_fn(f, i + 1, r);
    ParseCounts(f, i + 1, r);
    table.rows.push_back(std::move(r));
  }
  return table;
}

std::string Rate(int n, int trials, double rate) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f%% (%d/%d)", 100.0 * rate, n, trials);
  return buf;
}

std::string Rates(const ResultRow& r) {
  char mean[32];
  std::snprintf(mean, sizeof mean, "%.2f", r.mean_grasp_attempts());
  return Rate(r.picks, r.trials, r.pick_rate()) + " | " +
         Rate(r.deliveries, r.trials, r.delivery_rate()) + " | " + mean +
         " | " + Rate(r.loop_failures, r.trials, r.loop_failure_rate()) +
         " | " + std::to_string(r.eval_seed) + " |";
}

const ResultRow* FindRow(const ResultsTable& t, std::string_view label) {
  for (const ResultRow& r : t.rows) {
    if (r.label == label) return &r;
  }
  return nullptr;
}

std::string Points(double a, double b) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+.1f", 100.0 * (a - b));
  return buf;
}

}  // namespace

std::string GridCsv(const ResultsTable& table) {
  std::string out = kGridHeader + "\n";
  for (const ResultRow& r : table.rows) {
    out += r.label + "," + (r.haptic ? "1" : "0") + "," +
           (r.recovery_samples ? "1" : "0") + "," + CountColumns(r) + "\n";
  }
  return out;
}

std::string GeneralizationCsv(const ResultsTable& table) {
  std::string out = kGeneralizationHeader + "\n";
  for (const ResultRow& r : table.rows) {
    out += r.label + "," + Fixed(r.size_multiplier) + "," + Fixed(r.contrast) +
           "," + CountColumns(r) + "\n";
  }
  return out;
}

ResultsTable ParseGridCsv(std::string_view text) {
  return Parse(text, kGridHeader,
               [](const std::vector<std::string>& f, std::size_t line,
                  ResultRow& r) {
                 r.haptic = Flag(f[1], line);
                 r.recovery_samples = Flag(f[2], line);
               });
}

ResultsTable ParseGeneralizationCsv(std::string_view text) {
  return Parse(text, kGeneralizationHeader,
               [](const std::vector<std::string>& f, std::size_t line,
                  ResultRow& r) {
                 r.size_multiplier = Number<double>(f[1], line);
                 r.contrast = Number<double>(f[2], line);
               });
}

std::string RenderReport(std::string_view grid_csv,
                         std::string_view generalization_csv) {
  const ResultsTable grid = ParseGridCsv(grid_csv);
  const ResultsTable gen = ParseGeneralizationCsv(generalization_csv);
  std::string md = "# Evaluation report\n\n## Condition grid\n\n";
  md +=
      "| Condition | Haptic | Recovery samples | Pick | Delivery | Mean grasp "
      "attempts | Loop failures | Eval seed |\n"
      "|---|---|---|---|---|---|---|---|\n";
  for (const ResultRow& r : grid.rows) {
    md += "| " + r.label + " | " + (r.haptic ? "yes" : "no") + " | " +
          (r.recovery_samples ? "yes" : "no") + " | " + Rates(r) + "\n";
  }
  if (grid.rows.empty()) md += "\n(no conditions)\n";

  const ResultRow* hr = FindRow(grid, "haptic_recovery");
  const ResultRow* nr = FindRow(grid, "no_haptic_recovery");
  const ResultRow* hn = FindRow(grid, "haptic_no_recovery");
  const ResultRow* nn = FindRow(grid, "no_haptic_no_recovery");
  if (hr && nr && hn && nn) {
    md += "\nDelivery difference, haptic minus no-haptic (recovery-trained): " +
          Points(hr->delivery_rate(), nr->delivery_rate()) + " points.\n";
    md += "Delivery difference, recovery minus no-recovery: haptic " +
          Points(hr->delivery_rate(), hn->delivery_rate()) +
          " points, no-haptic " +
          Points(nr->delivery_rate(), nn->delivery_rate()) + " points.\n";
  }

  md += "\n## Novel objects\n\n";
  md +=
      "| Variant | Size multiplier | Contrast | Pick | Delivery | Mean grasp "
      "attempts | Loop failures | Eval seed |\n"
      "|---|---|---|---|---|---|---|---|\n";
  for (const ResultRow& r : gen.rows) {
    char dims[64];
    std::snprintf(dims, sizeof dims, "%.3f | %.2f", r.size_multiplier,
                  r.contrast);
    md += "| " + r.label + " | " + dims + " | " + Rates(r) + "\n";
  }
  if (gen.rows.empty()) md += "\n(no variants)\n";
  return md;
}

std::vector<int> SelectTraceTrials(const std::vector<control::Trace>& traces) {
  std::vector<int> out;
  if (traces.empty()) return out;
  out.push_back(0);
  auto first = [&](unsigned flag) {
    for (std::size_t i = 0; i < traces.size(); ++i) {
      for (const control::TraceRow& row : traces[i]) {
        if (row.phase_flags & flag) return static_cast<int>(i);
      }
    }
    return -1;
  };
  for (unsigned flag : {unsigned(control::kFlagDelivered),
                        unsigned(control::kFlagSlip)}) {
    const int i = first(flag);
    if (i > 0 && std::find(out.begin(), out.end(), i) == out.end()) {
      out.push_back(i);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string ReadTextFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteTextFile(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (out) out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
}

void EmitReport(const std::filesystem::path& out_dir, const ResultsTable& grid,
                const ResultsTable& generalization,
                const std::map<int, control::Trace>& traces) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    throw Error(ErrorCode::kIo,
                "cannot create " + out_dir.string() + ": " + ec.message());
  }
  const std::string grid_csv = GridCsv(grid);
  const std::string gen_csv = GeneralizationCsv(generalization);
  WriteTextFile(out_dir / "grid.csv", grid_csv);
  WriteTextFile(out_dir / "generalization.csv", gen_csv);
  for (const auto& [trial, trace] : traces) {
    control::WriteTraceCsv(
        out_dir / ("force_trace_" + std::to_string(trial) + ".csv"), trace);
  }
  WriteTextFile(out_dir / "report.md", RenderReport(grid_csv, gen_csv));
}

std::string RegenerateReport(const std::filesystem::path& in_dir) {
  const std::string grid_csv = ReadTextFile(in_dir / "grid.csv");
  const auto gen_path = in_dir / "generalization.csv";
  const std::string gen_csv = std::filesystem::exists(gen_path)
                                  ? ReadTextFile(gen_path)
                                  : GeneralizationCsv({});
  try {
    return RenderReport(grid_csv, gen_csv);
  } catch (const Error& e) {
    throw Error(e.code(), in_dir.string() + ": " + e.what());
  }
}

}  // namespace hapchunk::harness
