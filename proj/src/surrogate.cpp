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

#include "dgpa/surrogate.hpp"

#include <cmath>

namespace dgpa {

double mape_loss(const VectorXr& predictions, const VectorXr& targets) {
  require(predictions.size() == targets.size(), "mape_loss: length mismatch");
  require(predictions.size() > 0, "mape_loss: empty input");
  const auto denom = targets.cwiseAbs().cwiseMax(kMapeEpsilon).array();
  return 100.0 * ((targets - predictions).cwiseAbs().array() / denom).mean();
}

Var mape_loss(Var predictions, const VectorXr& targets) {
  require(predictions.value().rank() == 1 && predictions.value().size() == targets.size(),
          "mape_loss: length mismatch");
  require(targets.size() > 0, "mape_loss: empty input");
  Tape& tape = predictions.tape();
  const Tensor inv({targets.size()}, VectorXr(targets.cwiseAbs().cwiseMax(kMapeEpsilon).cwiseInverse()));
  const Var err = abs(sub(tape.constant(Tensor::from_vector(targets)), predictions));
  return scale(mean(mul(err, tape.constant(inv))), 100.0);
}

std::vector<std::pair<Index, Index>> sample_index_pairs(Index batch, Index cap, RngStream& rng) {
  std::vector<std::pair<Index, Index>> all;
  for (Index i = 0; i < batch; ++i)
    for (Index j = i + 1; j < batch; ++j) all.emplace_back(i, j);
  const Index want = std::min<Index>(cap, static_cast<Index>(all.size()));
  for (Index i = 0; i < want; ++i) {
    const Index j = i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(all.size()) - static_cast<std::uint64_t>(i)));
    std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(j)]);
  }
  all.resize(static_cast<std::size_t>(want));
  return all;
}

namespace {

void check_lipschitz(const LipschitzParams& p) {
  require(p.l1 > 0.0 && p.l1 <= p.l2, "bi-Lipschitz bounds must satisfy 0 < L1 <= L2");
  require(p.weight >= 0.0, "bi-Lipschitz weight must be nonnegative");
  require(p.pairs_per_batch > 0, "bi-Lipschitz pairs per batch must be positive");
}

}  // namespace

double bilipschitz_penalty(const MatrixXr& inputs, const MatrixXr& hiddens, const LipschitzParams& params,
                           RngStream rng) {
  check_lipschitz(params);
  require(inputs.rows() == hiddens.rows(), "bilipschitz_penalty: inputs and hiddens differ in batch size");
  require(inputs.rows() >= 2, "bilipschitz_penalty: batch must contain at least two rows");
  const auto pairs = sample_index_pairs(inputs.rows(), params.pairs_per_batch, rng);
  double total = 0.0;
  for (const auto& [i, j] : pairs) {
    const double dx = (inputs.row(i) - inputs.row(j)).norm();
    const double dh = (hiddens.row(i) - hiddens.row(j)).norm();
    const double lower = std::max(0.0, params.l1 * dx - dh), upper = std::max(0.0, dh - params.l2 * dx);
    total += lower * lower + upper * upper;
  }
  return total / static_cast<double>(pairs.size());
}

Var bilipschitz_penalty(const MatrixXr& inputs, Var hiddens, const LipschitzParams& params, RngStream rng) {
  check_lipschitz(params);
  require(hiddens.value().rank() == 2 && inputs.rows() == hiddens.dim(0),
          "bilipschitz_penalty: inputs and hiddens differ in batch size");
  require(inputs.rows() >= 2, "bilipschitz_penalty: batch must contain at least two rows");
  const auto pairs = sample_index_pairs(inputs.rows(), params.pairs_per_batch, rng);
  const Index n = static_cast<Index>(pairs.size());
  std::vector<Index> left, right;
  Tensor lower_bound({n}), upper_bound({n});
  for (Index k = 0; k < n; ++k) {
    const auto [i, j] = pairs[static_cast<std::size_t>(k)];
    left.push_back(i);
    right.push_back(j);
    const double dx = (inputs.row(i) - inputs.row(j)).norm();
    lower_bound[k] = params.l1 * dx;
    upper_bound[k] = params.l2 * dx;
  }
  Tape& tape = hiddens.tape();
  const Var dh = sqrt(sum_rows(square(sub(gather_rows(hiddens, left), gather_rows(hiddens, right)))));
  const Var lower = relu(sub(tape.constant(std::move(lower_bound)), dh));
  const Var upper = relu(sub(dh, tape.constant(std::move(upper_bound))));
  return mean(add(square(lower), square(upper)));
}

SurrogateModel SurrogateModel::create(const SurrogateConfig& c, RngStream& rng) {
  check_lipschitz(c.lipschitz);
  require(c.noise_var > 0.0, "surrogate: noise variance must be positive");
  SurrogateModel m;
  RngStream trunk_rng = rng.split(1), gp_rng = rng.split(2);
  m.channel_mean = VectorXr::Zero(kBoosterChannels);
  m.channel_std = VectorXr::Ones(kBoosterChannels);
  m.trunk = build_encoder(ArchitectureSpec::surrogate(), kBoosterChannels, kWindowSteps, trunk_rng, "surrogate.trunk");
  m.feature_norm = FeatureNormalizer("surrogate.feature_norm", m.trunk.output_width());
  m.gp = make_gp_head("surrogate.gp", m.trunk.output_width(), c.rff_dim, c.length_scale, c.noise_var, gp_rng);
  m.lipschitz = c.lipschitz;
  return m;
}

void SurrogateModel::fit_standardizer(const std::vector<WindowedSample>& windows) {
  require(!windows.empty(), "fit_standardizer: no windows");
  VectorXr sum = VectorXr::Zero(kBoosterChannels), sq = VectorXr::Zero(kBoosterChannels);
  for (const auto& w : windows) {
    const auto m = w.inputs.matrix();
    sum += m.rowwise().sum();
    sq += m.array().square().matrix().rowwise().sum();
  }
  const double n = static_cast<double>(windows.size() * kWindowSteps);
  channel_mean = sum / n;
  channel_std = (sq / n - channel_mean.cwiseAbs2()).cwiseMax(0.0).cwiseSqrt().cwiseMax(1e-8);
}

Tensor SurrogateModel::standardize(const std::vector<WindowedSample>& windows, const std::vector<Index>& indices) const {
  const Index n = static_cast<Index>(indices.size());
  Tensor out({n, kBoosterChannels, kWindowSteps});
  const VectorXr inv_std = channel_std.cwiseInverse();
  for (Index i = 0; i < n; ++i) {
    const auto& w = windows[static_cast<std::size_t>(indices[static_cast<std::size_t>(i)])];
    require(w.inputs.size() == kBoosterChannels * kWindowSteps, "surrogate: windows must be [5, 15]");
    Eigen::Map<MatrixXr> dst(out.data().data() + i * kBoosterChannels * kWindowSteps, kBoosterChannels, kWindowSteps);
    dst = inv_std.asDiagonal() * (w.inputs.matrix().colwise() - channel_mean);
  }
  return out;
}

SurrogateModel::Output SurrogateModel::forward(Tape& tape, const Tensor& inputs, Mode mode, RngStream& rng) {
  const Var hidden = trunk.forward(tape, tape.constant(inputs), mode, rng);
  const Var features = rff_features(gp.rff, feature_norm.forward(tape, hidden, mode));
  return {gp_forward_features(gp, features), hidden, features};
}

std::vector<Parameter*> SurrogateModel::parameters() {
  std::vector<Parameter*> out = trunk.parameters();
  out.push_back(&gp.beta);
  return out;
}

TensorBundle SurrogateModel::export_bundle() const {
  TensorBundle b;
  trunk.export_to(b);
  feature_norm.export_to(b);
  gp.export_to(b, "surrogate.gp");
  b["surrogate.channel_mean"] = Tensor::from_vector(channel_mean);
  b["surrogate.channel_std"] = Tensor::from_vector(channel_std);
  b["surrogate.config"] = Tensor({5}, {static_cast<double>(gp.feature_dim()), lipschitz.l1, lipschitz.l2,
                                       lipschitz.weight, static_cast<double>(lipschitz.pairs_per_batch)});
  return b;
}

SurrogateModel SurrogateModel::from_bundle(const TensorBundle& bundle) {
  const Tensor& cfg = bundle_get(bundle, "surrogate.config", {5});
  SurrogateConfig c;
  c.rff_dim = static_cast<Index>(cfg[0]);
  c.lipschitz = {cfg[1], cfg[2], cfg[3], static_cast<Index>(cfg[4])};
  RngStream scratch(0);
  SurrogateModel m = create(c, scratch);
  m.trunk.import_from(bundle);
  m.feature_norm.import_from(bundle);
  m.gp.import_from(bundle, "surrogate.gp");
  m.channel_mean = bundle_get(bundle, "surrogate.channel_mean", {kBoosterChannels}).data();
  m.channel_std = bundle_get(bundle, "surrogate.channel_std", {kBoosterChannels}).data();
  return m;
}

namespace {

MatrixXr flatten_rows(const Tensor& inputs) { return inputs.matrix(); }

std::pair<VectorXr, MatrixXr> infer_all(SurrogateModel& model, const std::vector<WindowedSample>& windows,
                                        Mode mode = Mode::infer) {
  const Index n = static_cast<Index>(windows.size());
  VectorXr means(n);
  MatrixXr features(n, model.gp.feature_dim());
  RngStream unused(0);
  const Index chunk = mode == Mode::calibrate ? 256 : 128;
  for (Index begin = 0; begin < n; begin += chunk) {
    const Index count = std::min(chunk, n - begin);
    std::vector<Index> idx(static_cast<std::size_t>(count));
    for (Index i = 0; i < count; ++i) idx[static_cast<std::size_t>(i)] = begin + i;
    Tape tape;
    const auto out = model.forward(tape, model.standardize(windows, idx), mode, unused);
    means.segment(begin, count) = out.prediction.value().data();
    features.middleRows(begin, count) = out.features.value().matrix();
  }
  return {std::move(means), std::move(features)};
}

}  // namespace

SurrogateTraining train_surrogate(const std::vector<WindowedSample>& windows, const SurrogateConfig& config,
                                  RngStream rng) {
  if (windows.empty()) throw ContractViolation("train_surrogate: empty dataset");
  require(config.epochs >= 0, "train_surrogate: epochs must be >= 0");
  require(config.batch_size >= 2, "train_surrogate: batch size must be >= 2");
  require(windows.size() >= 2, "train_surrogate: need at least two windows");

  RngStream init_rng = rng.split(0);
  SurrogateTraining result{SurrogateModel::create(config, init_rng), {}};
  SurrogateModel& model = result.model;
  model.fit_standardizer(windows);

  const std::vector<Parameter*> params = model.parameters();
  long step = 0;
  for (Index epoch = 0; epoch < config.epochs; ++epoch) {
    RngStream epoch_rng = rng.split(1000 + static_cast<std::uint64_t>(epoch));
    const auto order = shuffled_indices(static_cast<Index>(windows.size()), epoch_rng);
    double total = 0.0;
    for (const auto& batch : make_batches(order, config.batch_size)) {
      const Tensor inputs = model.standardize(windows, batch);
      VectorXr targets(static_cast<Index>(batch.size()));
      for (std::size_t i = 0; i < batch.size(); ++i) targets[static_cast<Index>(i)] = windows[static_cast<std::size_t>(batch[i])].target;
      Tape tape;
      for (Parameter* p : params) tape.param(*p);
      const auto out = model.forward(tape, inputs, Mode::train, epoch_rng);
      Var loss = mape_loss(out.prediction, targets);
      if (model.lipschitz.weight > 0.0) {
        const Var penalty = bilipschitz_penalty(flatten_rows(inputs), out.hidden, model.lipschitz, epoch_rng.split(static_cast<std::uint64_t>(step)));
        loss = add(loss, scale(penalty, model.lipschitz.weight));
      }
      total += loss.value()[0] * static_cast<double>(batch.size());
      tape.backward(loss);
      adam_step(params, config.adam, ++step);
    }
    result.history.push_back(total / static_cast<double>(windows.size()));
  }

  // Running batchnorm statistics lag the final weights; recompute them over the training windows.
  std::vector<BatchNorm1DLayer*> norms = model.trunk.batchnorm_layers();
  reset_calibration(norms);
  infer_all(model, windows, Mode::calibrate);

  const auto [means, features] = infer_all(model, windows);
  fit_precision(model.gp, features, VectorXr::Ones(features.rows()));
  return result;
}

std::vector<StepPrediction> predict_windows(SurrogateModel& model, const std::vector<WindowedSample>& windows) {
  require(model.gp.fitted, "predict_next_step: GP head has not been fitted");
  std::vector<StepPrediction> out;
  if (windows.empty()) return out;
  const auto [means, features] = infer_all(model, windows);
  const GPPrediction gp = gp_predict_features(model.gp, features, GPTask::regression);
  for (Index i = 0; i < means.size(); ++i) out.push_back({gp.mean[i], gp.stddev[i]});
  return out;
}

StepPrediction predict_next_step(SurrogateModel& model, const WindowedSample& window) {
  return predict_windows(model, {window}).front();
}

std::vector<StepPrediction> ramp_probe(SurrogateModel& model, const WindowedSample& base, Index channel,
                                       const std::vector<double>& increments) {
  require(channel >= 0 && channel < kBoosterChannels, "ramp_probe: channel out of range");
  std::vector<WindowedSample> shifted;
  shifted.reserve(increments.size());
  for (double inc : increments) {
    WindowedSample w = base;
    w.inputs.matrix().row(channel).array() += inc;
    shifted.push_back(std::move(w));
  }
  return predict_windows(model, shifted);
}

}  // namespace dgpa
