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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dgpa/tensor.hpp"

namespace dgpa {

struct RocCurve {
  std::vector<double> thresholds;  // descending; the first is +inf
  std::vector<double> fpr;
  std::vector<double> tpr;
  double auc = 0.0;

  friend bool operator==(const RocCurve&, const RocCurve&) = default;
};

/// Sweeps every distinct score as a threshold (score >= threshold is positive).
RocCurve roc_curve(const std::vector<double>& scores, const std::vector<int>& labels);

/// TPR of `curve` at each FPR in `grid`, linear between distinct FPR values;
/// at an FPR shared by several points the highest TPR is used.
std::vector<double> interpolate_tpr(const RocCurve& curve, const std::vector<double>& grid);

/// `points` uniform values covering [0, 1].
std::vector<double> uniform_grid(std::size_t points = 512);

struct SmearBand {
  std::vector<double> fpr_grid;
  std::vector<double> tpr_low;
  std::vector<double> tpr_high;
  int trials = 0;

  double mean_width() const;
  friend bool operator==(const SmearBand&, const SmearBand&) = default;
};

/// Resamples each score from N(mean_i, std_i^2) `trials` times and reports the
/// pointwise 5th / 95th percentile of the interpolated TPR.
SmearBand roc_with_smearing(const std::vector<double>& means, const std::vector<double>& stds,
                            const std::vector<int>& labels, int trials, RngStream rng,
                            std::size_t grid_points = 512);

/// Linear-interpolation percentile (q in [0, 100]) of an unsorted sample.
double percentile(std::vector<double> values, double q);

/// mean(std | flag) / mean(std | !flag).
double uncertainty_ratio(const std::vector<double>& stds, const std::vector<bool>& flags);

struct GPPosterior {
  VectorXr mean;
  VectorXr variance;
};

/// Exact 1-D GP regression with a unit-variance RBF kernel.
GPPosterior exact_gp_oracle(const VectorXr& train_x, const VectorXr& train_y, const VectorXr& queries,
                            double length_scale, double noise_var);

struct EvalReport {
  std::optional<RocCurve> roc;
  std::optional<SmearBand> band;
  std::optional<double> uncertainty_ratio;
  std::map<std::string, double> class_uncertainty;  // mean predictive std per group
  std::map<std::string, std::string> config;
  std::uint64_t seed = 0;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& json);

}  // namespace dgpa
