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

#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "dgpa/autodiff.hpp"

namespace dgpa {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update. `step` is 1-based. Frozen parameters are skipped.
void adam_step(std::span<Parameter* const> params, const AdamConfig& config, long step);

struct Gaussian {
  double sigma;
};
struct Uniform {
  double low, high;
};
/// Gaussian with sigma = sqrt(2 / fan_in); fan_in is the product of all but the first dimension.
struct FanInScaled {};
using InitScheme = std::variant<Gaussian, Uniform, FanInScaled>;

Tensor seeded_init(const Shape& shape, const InitScheme& scheme, RngStream& rng);

/// Scalar-valued forward pass recorded on the supplied tape.
using ScalarForward = std::function<Var(Tape&, const Tensor& input)>;

struct GradCheckEntry {
  std::string name;
  Index coordinates_checked = 0;
  double max_relative_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_relative_error() const;
  bool passed(double tolerance) const { return max_relative_error() < tolerance; }
};

/// Compares reverse-mode gradients against central differences on up to
/// `coordinates` randomly chosen entries per parameter (all entries when
/// the parameter is smaller). Throws if the forward is not deterministic.
GradCheckReport finite_diff_check(const ScalarForward& forward, std::span<Parameter* const> params,
                                  const Tensor& probe_input, double step, RngStream rng,
                                  Index coordinates = 32);

}  // namespace dgpa

namespace dgpa {

/// Fisher-Yates permutation of [0, n).
std::vector<Index> shuffled_indices(Index n, RngStream& rng);

/// Splits `order` into ceil(n / batch_size) contiguous chunks of near-equal size.
std::vector<std::vector<Index>> make_batches(const std::vector<Index>& order, Index batch_size);

/// Per-epoch mean training loss.
using TrainingHistory = std::vector<double>;

}  // namespace dgpa
