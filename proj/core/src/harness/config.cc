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

#include "hapchunk/harness/config.h"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <system_error>
#include <vector>

#include "hapchunk/error.h"

namespace hapchunk::harness {
namespace {

std::string_view Trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void BadValue(const std::string& key, const std::string& value,
                           std::string_view expected) {
  throw Error(ErrorCode::kConfiguration, "config key '" + key + "': '" +
                                            value + "' is not " +
                                            std::string(expected));
}

template <typename T>
T ParseNumber(const std::string& key, const std::string& value,
              std::string_view expected) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) BadValue(key, value, expected);
  return out;
}

bool ParseBool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  BadValue(key, value, "a boolean");
}

std::string FormatDouble(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Binding {
  std::function<void(const std::string& key, const std::string& value)> set;
  std::function<std::string()> get;
};

template <typename T>
Binding Unsigned(T& field) {
  return {[&field](const std::string& k, const std::string& v) {
            field = ParseNumber<T>(k, v, "a non-negative integer");
          },
          [&field] { return std::to_string(field); }};
}

Binding Int(int& field) {
  return {[&field](const std::string& k, const std::string& v) {
            field = ParseNumber<int>(k, v, "an integer");
          },
          [&field] { return std::to_string(field); }};
}

Binding Real(double& field) {
  return {[&field](const std::string& k, const std::string& v) {
            field = ParseNumber<double>(k, v, "a real number");
          },
          [&field] { return FormatDouble(field); }};
}

Binding Bool(bool& field) {
  return {[&field](const std::string& k, const std::string& v) {
            field = ParseBool(k, v);
          },
          [&field] { return std::string(field ? "true" : "false"); }};
}

std::map<std::string, Binding> Bindings(ExperimentConfig& c) {
  policy::PolicyConfig& p = c.policy;
  env::EnvConfig& e = c.env;
  std::map<std::string, Binding> b;
  b["master_seed"] = Unsigned(c.master_seed);
  b["n_success"] = Int(c.profile.n_success);
  b["n_recovery"] = Int(c.profile.n_recovery);
  b["n_eval_trials"] = Int(c.n_eval_trials);
  b["ensemble_m"] = Real(c.ensemble.m);
  b["ensemble_orientation"] = {
      [&c](const std::string& k, const std::string& v) {
        if (v == "oldest_first") {
          c.ensemble.orientation = control::EnsembleOrientation::kOldestFirst;
        } else if (v == "newest_first") {
          c.ensemble.orientation = control::EnsembleOrientation::kNewestFirst;
        } else {
          BadValue(k, v, "oldest_first or newest_first");
        }
      },
      [&c] {
        return std::string(c.ensemble.orientation ==
                                   control::EnsembleOrientation::kOldestFirst
                               ? "oldest_first"
                               : "newest_first");
      }};

  b["policy.chunk_k"] = Unsigned(p.chunk_k);
  b["policy.d_model"] = Unsigned(p.d_model);
  b["policy.n_heads"] = Unsigned(p.n_heads);
  b["policy.n_encoder_layers"] = Unsigned(p.n_encoder_layers);
  b["policy.n_decoder_layers"] = Unsigned(p.n_decoder_layers);
  b["policy.ffn_dim"] = Unsigned(p.ffn_dim);
  b["policy.z_dim"] = Unsigned(p.z_dim);
  b["policy.beta_kl"] = Real(p.beta_kl);
  b["policy.haptic_enabled"] = Bool(p.haptic_enabled);
  b["policy.lr"] = Real(p.lr);
  b["policy.train_steps"] = Unsigned(p.train_steps);
  b["policy.batch_size"] = Unsigned(p.batch_size);
  b["policy.rng_seed"] = Unsigned(p.rng_seed);

  b["env.min_seeds"] = Int(e.min_seeds);
  b["env.max_seeds"] = Int(e.max_seeds);
  b["env.dish_center_jitter"] = Real(e.dish_center_jitter);
  b["env.seed_size_multiplier"] = Real(e.seed_size_multiplier);
  b["env.seed_contrast"] = Real(e.seed_contrast);
  b["env.p_slip"] = Real(e.p_slip);
  b["env.max_steps"] = Int(e.max_steps);
  b["env.force_first_slip"] = Bool(e.force_first_slip);
  b["env.target_tube"] = Int(e.target_tube);
  return b;
}

}  // namespace

void ExperimentConfig::Validate() const {
  if (profile.n_success < 0 || profile.n_recovery < 0 ||
      profile.n_success + profile.n_recovery == 0) {
    throw Error(ErrorCode::kConfiguration,
                "dataset profile needs a non-negative count and at least one "
                "episode");
  }
  if (n_eval_trials < 0) {
    throw Error(ErrorCode::kConfiguration, "n_eval_trials must be >= 0");
  }
  if (!(ensemble.m >= 0.0)) {
    throw Error(ErrorCode::kConfiguration, "ensemble_m must be >= 0");
  }
  policy.Validate();
  env.Validate();
}

KeyValues ParseKeyValues(std::string_view text) {
  KeyValues out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const std::string_view raw = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{}
                                        : text.substr(nl + 1);
    ++line_no;
    const std::string_view line = Trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::kFormat, "config line " + std::to_string(line_no) +
                                          ": expected key = value");
    }
    const std::string key(Trim(line.substr(0, eq)));
    const std::string value(Trim(line.substr(eq + 1)));
    if (key.empty()) {
      throw Error(ErrorCode::kFormat,
                  "config line " + std::to_string(line_no) + ": empty key");
    }
    if (!out.emplace(key, value).second) {
      throw Error(ErrorCode::kFormat, "config line " +
                                          std::to_string(line_no) +
                                          ": duplicate key '" + key + "'");
    }
  }
  return out;
}

KeyValues ReadKeyValueFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return ParseKeyValues(ss.str());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void ApplyKeyValues(const KeyValues& values, ExperimentConfig& config) {
  ExperimentConfig staged = config;
  auto bindings = Bindings(staged);
  for (const auto& [key, value] : values) {
    auto it = bindings.find(key);
    if (it == bindings.end()) {
      throw Error(ErrorCode::kConfiguration, "unknown config key '" + key + "'");
    }
    it->second.set(key, value);
  }
  config = staged;
}

std::string FormatKeyValues(const ExperimentConfig& config) {
  ExperimentConfig copy = config;
  std::string out;
  for (const auto& [key, binding] : Bindings(copy)) {
    out += key + " = " + binding.get() + "\n";
  }
  return out;
}

}  // namespace hapchunk::harness
