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

#include "dgpa/autodiff.hpp"
#include "dgpa/checkpoint.hpp"

namespace dgpa {

enum class GPTask { regression, binary };

/// Frozen random Fourier feature map approximating an RBF kernel with length-scale `length_scale`.
struct RFFMap {
  Tensor projection;  // [D, m], entries ~ N(0, 1 / length_scale^2)
  Tensor phases;      // [D], uniform in [0, 2 pi)
  double length_scale = 1.0;

  static RFFMap sample(Index feature_dim, Index input_dim, double length_scale, RngStream& rng);

  Index feature_dim() const { return projection.dim(0); }
  Index input_dim() const { return projection.dim(1); }
};

/// sqrt(2/D) cos(h W^T + b); gradients reach h only.
Var rff_features(const RFFMap& map, Var h);
MatrixXr rff_features(const RFFMap& map, const MatrixXr& h);

/// Output layer of a distance-aware network: RFF map, trainable output
/// weights, and a Laplace posterior precision over those weights.
struct GPHeadState {
  RFFMap rff;
  Parameter beta;        // [D]
  MatrixXr precision;    // [D, D]
  MatrixXr covariance;   // [D, D], valid once fitted
  double ridge = 1e-3;
  bool fitted = false;

  Index feature_dim() const { return rff.feature_dim(); }
  Index input_dim() const { return rff.input_dim(); }

  void export_to(TensorBundle& bundle, const std::string& name) const;
  void import_from(const TensorBundle& bundle, const std::string& name);
};

GPHeadState make_gp_head(const std::string& name, Index input_dim, Index feature_dim, double length_scale,
                         double ridge, RngStream& rng);

/// beta^T phi(h) per row of h [batch, m] -> [batch].
Var gp_forward(GPHeadState& state, Var h);
/// Same, from precomputed features phi [batch, D].
Var gp_forward_features(GPHeadState& state, Var features);

/// precision = ridge I + sum_i w_i phi_i phi_i^T, then covariance by Cholesky.
void fit_precision(GPHeadState& state, const MatrixXr& features, const VectorXr& weights);
/// precision = ridge I; beta untouched.
void reset_precision(GPHeadState& state);

/// Closed-form ridge solution beta = (ridge I + Phi^T Phi)^{-1} Phi^T y; the
/// RFF approximation of the exact GP posterior mean with noise variance = ridge.
void fit_posterior_mean(GPHeadState& state, const MatrixXr& features, const VectorXr& targets);

struct GPPrediction {
  VectorXr mean;         // beta^T phi
  VectorXr variance;     // phi^T Sigma phi
  VectorXr stddev;
  VectorXr probability;  // binary task only: mean-field sigmoid
};

/// sigmoid(logit / sqrt(1 + pi/8 * variance)).
double mean_field_probability(double logit, double variance);

GPPrediction gp_predict(const GPHeadState& state, const MatrixXr& h, GPTask task);
GPPrediction gp_predict_features(const GPHeadState& state, const MatrixXr& features, GPTask task);

}  // namespace dgpa
