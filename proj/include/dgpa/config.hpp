/*
 * Copyright 2026 The DGPA Toolkit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "dgpa/siamese.hpp"
#include "dgpa/surrogate.hpp"

namespace dgpa {

struct DataSettings {
  Index train_normal = 200;
  Index train_anomaly_a = 100;
  Index train_anomaly_b = 0;
  Index test_normal = 200;
  Index test_anomaly_a = 100;
  Index test_anomaly_b = 100;
  Index series_steps = 400;
  Index ood_start = 175;
  Index ood_end = 225;
  double gate_threshold = kGateThreshold;
};

struct SiameseSettings {
  SiameseConfig model{};
  Index pairs_per_label = 200;
  Index test_pairs = 200;
};

struct EvaluateSettings {
  int smear_trials = 250;
  Index grid_points = 512;
};

struct ProbeSettings {
  Index channel = kBoosterOutputChannel;
  Index base_window = 50;  // index into the filtered windows
  double max_increment = 2.0;
  Index steps = 20;
};

struct GradcheckSettings {
  double step = 1e-6;
  double objective_step = 1e-4;
  double tolerance = 1e-4;
  Index coordinates = 32;
};

/// Resolved run configuration. Every field has a default, so an empty file is valid.
struct RunConfig {
  std::uint64_t seed = 42;
  DataSettings data;
  SiameseSettings siamese;
  SurrogateConfig surrogate;
  EvaluateSettings evaluate;
  ProbeSettings probe;
  GradcheckSettings gradcheck;
};

/// INI-style text: `[section]` headers, `key = value` lines, `#` or `;` comments.
/// Unknown sections or keys, duplicates and out-of-range values raise ParseError
/// with the offending line.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Writes every key, defaults included, in the format parse_config reads.
std::string serialize_config(const RunConfig& config);

/// Throws ParseError (line 0) when a value is out of range.
void validate_config(const RunConfig& config);

}  // namespace dgpa
