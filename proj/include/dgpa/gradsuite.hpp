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

#include <string>
#include <vector>

#include "dgpa/optim.hpp"

namespace dgpa {

struct GradSuiteEntry {
  std::string name;
  Index coordinates_checked = 0;
  double max_relative_error = 0.0;
};

struct GradSuiteSettings {
  double step = 1e-6;  // layer primitives, O(1) outputs
  /// Full objectives. The surrogate loss is in percent (O(100) at init), which
  /// lifts the central-difference roundoff floor; a larger step keeps it below
  /// the tolerance for small gradient entries.
  double objective_step = 1e-4;
  Index coordinates = 32;
};

/// Central-difference checks of every layer primitive and of both full
/// training objectives, all in inference mode. Deterministic in `seed`.
std::vector<GradSuiteEntry> run_gradient_suite(std::uint64_t seed, const GradSuiteSettings& settings = {});

}  // namespace dgpa
