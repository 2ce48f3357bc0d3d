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

#include <vector>

#include "dgpa/data.hpp"
#include "dgpa/gp_head.hpp"
#include "dgpa/layers.hpp"
#include "dgpa/optim.hpp"

namespace dgpa {

inline constexpr double kMapeEpsilon = 1e-6;

/// Soft bi-Lipschitz constraint L1 |x1 - x2| <= |h1 - h2| <= L2 |x1 - x2|.
struct LipschitzParams {
  double l1 = 0.75;
  double l2 = 1.25;
  double weight = 0.1;
  Index pairs_per_batch = 64;
};

/// 100 * mean |t - p| / max(|t|, 1e-6).
double mape_loss(const VectorXr& predictions, const VectorXr& targets);
Var mape_loss(Var predictions, const VectorXr& targets);

/// Index pairs i < j sampled without replacement from a batch of `batch` rows.
std::vector<std::pair<Index, Index>> sample_index_pairs(Index batch, Index cap, RngStream& rng);

/// Mean over the sampled pairs of max(0, L1 dx - dh)^2 + max(0, dh - L2 dx)^2.
double bilipschitz_penalty(const MatrixXr& inputs, const MatrixXr& hiddens, const LipschitzParams& params,
                           RngStream rng);
Var bilipschitz_penalty(const MatrixXr& inputs, Var hiddens, const LipschitzParams& params, RngStream rng);

struct SurrogateConfig {
  Index epochs = 30;
  Index batch_size = 32;
  AdamConfig adam{};
  LipschitzParams lipschitz{};
  Index rff_dim = 256;
  double length_scale = 1.0;
  double noise_var = 1e-2;
};

class SurrogateModel {
 public:
  static SurrogateModel create(const SurrogateConfig& config, RngStream& rng);

  /// Fits per-channel mean / std used to standardize inputs.
  void fit_standardizer(const std::vector<WindowedSample>& windows);
  /// Standardized inputs [n, 5, 15] for the selected windows.
  Tensor standardize(const std::vector<WindowedSample>& windows, const std::vector<Index>& indices) const;

  struct Output {
    Var prediction;  // [batch]
    Var hidden;      // last hidden layer (dense-256 tanh), [batch, 256]
    Var features;    // RFF features, [batch, D]
  };
  Output forward(Tape& tape, const Tensor& inputs, Mode mode, RngStream& rng);

  std::vector<Parameter*> parameters();
  TensorBundle export_bundle() const;
  static SurrogateModel from_bundle(const TensorBundle& bundle);

  VectorXr channel_mean;
  VectorXr channel_std;
  Encoder trunk;
  FeatureNormalizer feature_norm;
  GPHeadState gp;
  LipschitzParams lipschitz;
};

struct SurrogateTraining {
  SurrogateModel model;
  TrainingHistory history;
};

/// Minimizes MAPE + weight * bi-Lipschitz penalty by mini-batch Adam, then fits
/// the GP precision with unit weights. Expects in-distribution (filtered) windows.
SurrogateTraining train_surrogate(const std::vector<WindowedSample>& windows, const SurrogateConfig& config,
                                  RngStream rng);

struct StepPrediction {
  double mean;
  double stddev;
};
StepPrediction predict_next_step(SurrogateModel& model, const WindowedSample& window);
std::vector<StepPrediction> predict_windows(SurrogateModel& model, const std::vector<WindowedSample>& windows);

/// Predictions for `base` with `channel` shifted by each increment.
std::vector<StepPrediction> ramp_probe(SurrogateModel& model, const WindowedSample& base, Index channel,
                                       const std::vector<double>& increments);

}  // namespace dgpa
