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

#include "dgpa/gp_head.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Cholesky>

#include "dgpa/linalg.hpp"
#include "dgpa/optim.hpp"

namespace dgpa {

RFFMap RFFMap::sample(Index feature_dim, Index input_dim, double length_scale, RngStream& rng) {
  require(feature_dim > 0 && input_dim > 0, "RFF dimensions must be positive");
  require(length_scale > 0.0, "RFF length-scale must be positive");
  RFFMap map;
  map.projection = seeded_init({feature_dim, input_dim}, Gaussian{1.0 / length_scale}, rng);
  map.phases = seeded_init({feature_dim}, Uniform{0.0, 2.0 * std::numbers::pi}, rng);
  map.length_scale = length_scale;
  return map;
}

Var rff_features(const RFFMap& map, Var h) {
  require(h.value().rank() == 2 && h.dim(1) == map.input_dim(),
          "rff_features: expected width " + std::to_string(map.input_dim()) + ", got " + shape_string(h.shape()));
  Tape& tape = h.tape();
  Var z = add_row_vector(matmul_nt(h, tape.constant(map.projection)), tape.constant(map.phases));
  return scale(cos(z), std::sqrt(2.0 / static_cast<double>(map.feature_dim())));
}

MatrixXr rff_features(const RFFMap& map, const MatrixXr& h) {
  require(h.cols() == map.input_dim(),
          "rff_features: expected width " + std::to_string(map.input_dim()) + ", got " + std::to_string(h.cols()));
  return random_fourier_features(h, map.projection.matrix(), map.phases.data());
}

GPHeadState make_gp_head(const std::string& name, Index input_dim, Index feature_dim, double length_scale,
                         double ridge, RngStream& rng) {
  require(ridge > 0.0, "GP head ridge must be positive");
  GPHeadState s;
  s.rff = RFFMap::sample(feature_dim, input_dim, length_scale, rng);
  s.beta = Parameter(name + ".beta", Tensor({feature_dim}));
  s.ridge = ridge;
  reset_precision(s);
  return s;
}

Var gp_forward_features(GPHeadState& state, Var features) {
  require(features.value().rank() == 2 && features.dim(1) == state.feature_dim(),
          "gp_forward: feature width mismatch");
  Tape& tape = features.tape();
  const Var beta = reshape(tape.param(state.beta), {state.feature_dim(), 1});
  return reshape(matmul(features, beta), {features.dim(0)});
}

Var gp_forward(GPHeadState& state, Var h) { return gp_forward_features(state, rff_features(state.rff, h)); }

void reset_precision(GPHeadState& state) {
  const Index d = state.feature_dim();
  state.precision = state.ridge * MatrixXr::Identity(d, d);
  state.covariance.resize(0, 0);
  state.fitted = false;
}

void fit_precision(GPHeadState& state, const MatrixXr& features, const VectorXr& weights) {
  const Index d = state.feature_dim();
  require(features.rows() == weights.size(), "fit_precision: one weight per feature row required");
  require(features.rows() == 0 || features.cols() == d, "fit_precision: feature width mismatch");
  require((weights.array() >= 0.0).all(), "fit_precision: weights must be nonnegative");
  MatrixXr precision = state.ridge * MatrixXr::Identity(d, d);
  if (features.rows() > 0)
    precision.selfadjointView<Eigen::Lower>().rankUpdate(features.transpose() * weights.cwiseSqrt().asDiagonal());
  precision.triangularView<Eigen::StrictlyUpper>() = precision.transpose();

  Eigen::LLT<MatrixXr> llt(precision);
  if (llt.info() != Eigen::Success)
    throw NumericalError("fit_precision: precision matrix is not positive definite; increase the ridge s");
  MatrixXr covariance = llt.solve(MatrixXr::Identity(d, d));
  const double residual = (covariance * precision - MatrixXr::Identity(d, d)).cwiseAbs().maxCoeff();
  if (!(residual < 1e-6))
    throw NumericalError("fit_precision: covariance inverse residual " + std::to_string(residual) +
                         " too large; increase the ridge s");
  state.precision = std::move(precision);
  state.covariance = std::move(covariance);
  state.fitted = true;
}

void fit_posterior_mean(GPHeadState& state, const MatrixXr& features, const VectorXr& targets) {
  const Index d = state.feature_dim();
  require(features.rows() == targets.size() && features.cols() == d, "fit_posterior_mean: shape mismatch");
  MatrixXr a = state.ridge * MatrixXr::Identity(d, d);
  a.noalias() += features.transpose() * features;
  Eigen::LLT<MatrixXr> llt(a);
  if (llt.info() != Eigen::Success) throw NumericalError("fit_posterior_mean: system not positive definite");
  state.beta.value.data() = llt.solve(features.transpose() * targets);
}

double mean_field_probability(double logit, double variance) {
  const double scaled = logit / std::sqrt(1.0 + std::numbers::pi / 8.0 * variance);
  return 1.0 / (1.0 + std::exp(-scaled));
}

GPPrediction gp_predict_features(const GPHeadState& state, const MatrixXr& features, GPTask task) {
  require(state.fitted, "gp_predict: GP head has not been fitted");
  require(features.cols() == state.feature_dim(), "gp_predict: feature width mismatch");
  GPPrediction out;
  out.mean = features * state.beta.value.data();
  out.variance = (features * state.covariance).cwiseProduct(features).rowwise().sum();
  for (Index i = 0; i < out.variance.size(); ++i) {
    if (out.variance[i] < -1e-10)
      throw NumericalError("gp_predict: predictive variance " + std::to_string(out.variance[i]) + " is negative");
    out.variance[i] = std::max(0.0, out.variance[i]);
  }
  out.stddev = out.variance.cwiseSqrt();
  if (task == GPTask::binary) {
    out.probability.resize(out.mean.size());
    for (Index i = 0; i < out.mean.size(); ++i) out.probability[i] = mean_field_probability(out.mean[i], out.variance[i]);
  }
  return out;
}

GPPrediction gp_predict(const GPHeadState& state, const MatrixXr& h, GPTask task) {
  return gp_predict_features(state, rff_features(state.rff, h), task);
}

void GPHeadState::export_to(TensorBundle& bundle, const std::string& name) const {
  bundle[name + ".rff_projection"] = rff.projection;
  bundle[name + ".rff_phases"] = rff.phases;
  bundle[beta.name] = beta.value;
  bundle[name + ".precision"] = Tensor::from_matrix(precision);
  if (fitted) bundle[name + ".covariance"] = Tensor::from_matrix(covariance);
  bundle[name + ".config"] = Tensor({3}, {rff.length_scale, ridge, fitted ? 1.0 : 0.0});
}

void GPHeadState::import_from(const TensorBundle& bundle, const std::string& name) {
  rff.projection = bundle_get(bundle, name + ".rff_projection");
  const Index d = rff.projection.dim(0);
  rff.phases = bundle_get(bundle, name + ".rff_phases", {d});
  beta = Parameter(name + ".beta", bundle_get(bundle, name + ".beta", {d}));
  precision = bundle_get(bundle, name + ".precision", {d, d}).matrix();
  const Tensor& cfg = bundle_get(bundle, name + ".config", {3});
  rff.length_scale = cfg[0];
  ridge = cfg[1];
  fitted = cfg[2] != 0.0;
  covariance = fitted ? MatrixXr(bundle_get(bundle, name + ".covariance", {d, d}).matrix()) : MatrixXr();
}

}  // namespace dgpa
