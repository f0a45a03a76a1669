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

#ifndef HAPCHUNK_HARNESS_REPORT_H_
#define HAPCHUNK_HARNESS_REPORT_H_

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "hapchunk/control/rollout.h"
#include "hapchunk/harness/experiment.h"

namespace hapchunk::harness {

// Reals are written with 6 decimals; counts and seeds as integers.
std::string GridCsv(const ResultsTable& table);
std::string GeneralizationCsv(const ResultsTable& table);

// Inverses of the writers. Throw kFormat on a wrong header or malformed row.
ResultsTable ParseGridCsv(std::string_view text);
ResultsTable ParseGeneralizationCsv(std::string_view text);

// Markdown summary. A pure function of the two CSV texts, so re-rendering
// from saved CSVs reproduces it exactly.
std::string RenderReport(std::string_view grid_csv,
                         std::string_view generalization_csv);

// Trials worth exporting: the first trial, the first delivery and the first
// slip, without repeats, in ascending order.
std::vector<int> SelectTraceTrials(const std::vector<control::Trace>& traces);

// Writes grid.csv, generalization.csv, force_trace_<trial>.csv for each
// entry of `traces`, and report.md. Throws kIo naming the path.
void EmitReport(const std::filesystem::path& out_dir, const ResultsTable& grid,
                const ResultsTable& generalization,
                const std::map<int, control::Trace>& traces);

// report.md text rebuilt from grid.csv and, when present,
// generalization.csv in `in_dir`.
std::string RegenerateReport(const std::filesystem::path& in_dir);

std::string ReadTextFile(const std::filesystem::path& path);
void WriteTextFile(const std::filesystem::path& path, std::string_view text);

}  // namespace hapchunk::harness

#endif  // HAPCHUNK_HARNESS_REPORT_H_
