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

#include "dgpa/siamese.hpp"

#include <cmath>

#include "dgpa/linalg.hpp"

namespace dgpa {

double similarity_score(const VectorXr& x1, const VectorXr& x2) {
  require(x1.size() == x2.size(), "similarity_score: embeddings differ in length");
  return std::abs((x1.array().square() - x2.array().square()).sum());
}

Var squared_difference(Var x1, Var x2) {
  require(x1.shape() == x2.shape(), "squared_difference: embeddings differ in shape");
  return abs(sub(square(x1), square(x2)));
}

double contrastive_loss(int label, double score, const ContrastiveParams& p) {
  require(std::isfinite(score), "contrastive_loss: score must be finite");
  const double hinge = std::max(p.margin - score, 0.0);
  return p.alpha * (1 - label) * score * score + (1.0 - p.alpha) * label * hinge * hinge;
}

Var contrastive_loss(Var scores, const std::vector<int>& labels, const ContrastiveParams& p) {
  const Index n = scores.value().size();
  require(static_cast<Index>(labels.size()) == n, "contrastive_loss: one label per score required");
  Tape& tape = scores.tape();
  Tensor similar({n}), dissimilar({n});
  for (Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    require(y == 0 || y == 1, "contrastive_loss: labels must be 0 or 1");
    similar[i] = p.alpha * (1 - y);
    dissimilar[i] = (1.0 - p.alpha) * y;
  }
  const Var pull = mul(tape.constant(std::move(similar)), square(scores));
  const Var hinge = relu(add_scalar(scale(scores, -1.0), p.margin));
  const Var push = mul(tape.constant(std::move(dissimilar)), square(hinge));
  return mean(add(pull, push));
}

SiameseModel SiameseModel::create(const SiameseConfig& c, RngStream& rng) {
  require(c.head_units > 0 && c.rff_dim > 0, "siamese: head and RFF widths must be positive");
  require(c.contrastive.alpha > 0.0 && c.contrastive.alpha < 1.0, "siamese: alpha must lie in (0, 1)");
  require(c.contrastive.margin > 0.0, "siamese: margin must be positive");
  SiameseModel m;
  ArchitectureSpec arch = ArchitectureSpec::siamese();
  arch.spectral_bound = c.spectral_bound;
  arch.power_iterations = c.power_iterations;
  RngStream enc_rng = rng.split(1), head_rng = rng.split(2), gp_rng = rng.split(3);
  m.encoder = build_encoder(arch, 1, kPulseLength, enc_rng, "siamese.encoder");
  m.head = DenseLayer("siamese.head", m.encoder.output_width(), c.head_units, Activation::relu, head_rng);
  m.head.enable_spectral(c.spectral_bound, c.power_iterations, head_rng);
  m.feature_norm = FeatureNormalizer("siamese.feature_norm", c.head_units);
  m.gp = make_gp_head("siamese.gp", c.head_units, c.rff_dim, c.length_scale, c.ridge, gp_rng);
  m.contrastive = c.contrastive;
  return m;
}

SiameseModel::Output SiameseModel::forward(Tape& tape, const Tensor& traces_a, const Tensor& traces_b, Mode mode,
                                           RngStream& rng) {
  require(traces_a.shape() == traces_b.shape(), "siamese: both sides of a pair batch must share a shape");
  const Index batch = traces_a.dim(0);
  // One pass over the stacked batch: both sides read the same parameters.
  const Var stacked = concat_rows(tape.constant(traces_a), tape.constant(traces_b));
  const Var embeddings = encoder.forward(tape, stacked, mode, rng);
  const Var diff = squared_difference(slice_rows(embeddings, 0, batch), slice_rows(embeddings, batch, batch));
  const Var hidden = feature_norm.forward(tape, head.forward(tape, diff, mode), mode);
  const Var features = rff_features(gp.rff, hidden);
  return {gp_forward_features(gp, features), features};
}

std::vector<Parameter*> SiameseModel::parameters() {
  std::vector<Parameter*> out = encoder.parameters();
  head.collect(out);
  out.push_back(&gp.beta);
  return out;
}

std::vector<std::pair<const Parameter*, const SpectralState*>> SiameseModel::spectral_weights() const {
  auto out = encoder.spectral_weights();
  if (head.spectral) out.emplace_back(&head.weight, &*head.spectral);
  return out;
}

Tensor SiameseModel::effective_weight(const Parameter& weight, const SpectralState& state) {
  const Index rows = weight.value.dim(0), cols = weight.value.size() / rows;
  const double sigma = state.u.dot(weight.value.matrix(rows, cols) * state.v);
  Tensor out = weight.value;
  if (sigma > state.bound) out.data() *= state.bound / sigma;
  return out;
}

TensorBundle SiameseModel::export_bundle() const {
  TensorBundle b;
  encoder.export_to(b);
  head.export_to(b);
  feature_norm.export_to(b);
  gp.export_to(b, "siamese.gp");
  const SpectralState& s = *head.spectral;
  b["siamese.config"] = Tensor({6}, {static_cast<double>(head.out_features()), static_cast<double>(gp.feature_dim()),
                                     contrastive.alpha, contrastive.margin, s.bound,
                                     static_cast<double>(s.iterations_per_step)});
  return b;
}

SiameseModel SiameseModel::from_bundle(const TensorBundle& bundle) {
  const Tensor& cfg = bundle_get(bundle, "siamese.config", {6});
  SiameseConfig c;
  c.head_units = static_cast<Index>(cfg[0]);
  c.rff_dim = static_cast<Index>(cfg[1]);
  c.contrastive = {cfg[2], cfg[3]};
  c.spectral_bound = cfg[4];
  c.power_iterations = static_cast<int>(cfg[5]);
  RngStream scratch(0);
  SiameseModel m = create(c, scratch);
  m.encoder.import_from(bundle);
  m.head.import_from(bundle);
  m.feature_norm.import_from(bundle);
  m.gp.import_from(bundle, "siamese.gp");
  return m;
}

std::pair<Tensor, Tensor> stack_pairs(const std::vector<PulsePair>& pairs, const std::vector<Index>& indices) {
  const Index n = static_cast<Index>(indices.size());
  Tensor a({n, 1, kPulseLength}), b({n, 1, kPulseLength});
  for (Index i = 0; i < n; ++i) {
    const PulsePair& p = pairs[static_cast<std::size_t>(indices[static_cast<std::size_t>(i)])];
    require(p.trace_a.size() == kPulseLength && p.trace_b.size() == kPulseLength,
            "siamese: traces must have 256 samples");
    a.data().segment(i * kPulseLength, kPulseLength) = p.trace_a.data();
    b.data().segment(i * kPulseLength, kPulseLength) = p.trace_b.data();
  }
  return {std::move(a), std::move(b)};
}

PairForward pair_forward(SiameseModel& model, const PulsePair& pair, Mode mode, RngStream& rng) {
  require(pair.trace_a.size() == kPulseLength && pair.trace_b.size() == kPulseLength,
          "pair_forward: traces must have 256 samples");
  require(mode == Mode::infer, "pair_forward: a single pair cannot form a training batch");
  Tape tape;
  const auto [a, b] = stack_pairs({pair}, {0});
  const auto out = model.forward(tape, a, b, mode, rng);
  return {out.score.value()[0], out.features.value().data()};
}

namespace {

// Infer-mode scores and features for all pairs, in chunks.
std::pair<VectorXr, MatrixXr> infer_all(SiameseModel& model, const std::vector<PulsePair>& pairs,
                                        Mode mode = Mode::infer) {
  const Index n = static_cast<Index>(pairs.size());
  VectorXr scores(n);
  MatrixXr features(n, model.gp.feature_dim());
  RngStream unused(0);
  const Index chunk = mode == Mode::calibrate ? 256 : 64;
  for (Index begin = 0; begin < n; begin += chunk) {
    const Index count = std::min(chunk, n - begin);
    std::vector<Index> idx(static_cast<std::size_t>(count));
    for (Index i = 0; i < count; ++i) idx[static_cast<std::size_t>(i)] = begin + i;
    const auto [a, b] = stack_pairs(pairs, idx);
    Tape tape;
    const auto out = model.forward(tape, a, b, mode, unused);
    scores.segment(begin, count) = out.score.value().data();
    features.middleRows(begin, count) = out.features.value().matrix();
  }
  return {std::move(scores), std::move(features)};
}

}  // namespace

SiameseTraining train_siamese(const std::vector<PulsePair>& pairs, const SiameseConfig& config, RngStream rng) {
  require(config.epochs >= 0, "train_siamese: epochs must be >= 0");
  require(config.batch_size >= 2, "train_siamese: batch size must be >= 2");
  bool has0 = false, has1 = false;
  for (const auto& p : pairs) (p.label ? has1 : has0) = true;
  if (!has0 || !has1) throw ContractViolation("train_siamese: dataset must contain both pair labels");

  RngStream init_rng = rng.split(0);
  SiameseTraining result{SiameseModel::create(config, init_rng), {}};
  SiameseModel& model = result.model;
  if (config.epochs == 0) return result;

  const std::vector<Parameter*> params = model.parameters();
  long step = 0;
  for (Index epoch = 0; epoch < config.epochs; ++epoch) {
    RngStream epoch_rng = rng.split(1000 + static_cast<std::uint64_t>(epoch));
    const auto order = shuffled_indices(static_cast<Index>(pairs.size()), epoch_rng);
    double total = 0.0;
    for (const auto& batch : make_batches(order, config.batch_size)) {
      const auto [a, b] = stack_pairs(pairs, batch);
      std::vector<int> labels;
      for (Index i : batch) labels.push_back(pairs[static_cast<std::size_t>(i)].label);
      Tape tape;
      for (Parameter* p : params) tape.param(*p);
      const auto out = model.forward(tape, a, b, Mode::train, epoch_rng);
      const Var loss = contrastive_loss(out.score, labels, model.contrastive);
      total += loss.value()[0] * static_cast<double>(batch.size());
      tape.backward(loss);
      adam_step(params, config.adam, ++step);
    }
    result.history.push_back(total / static_cast<double>(pairs.size()));
  }

  for (auto& [weight, state] : model.spectral_weights()) {
    auto& s = const_cast<SpectralState&>(*state);
    const Index rows = weight->value.dim(0);
    s.last_sigma = std::max(0.0, power_iteration(weight->value.matrix(rows, weight->value.size() / rows), s.u, s.v,
                                                 config.final_power_iterations));
  }

  // Running batchnorm statistics lag the final weights; recompute them over the training pairs.
  std::vector<BatchNorm1DLayer*> norms = model.encoder.batchnorm_layers();
  reset_calibration(norms);
  infer_all(model, pairs, Mode::calibrate);

  const auto [scores, features] = infer_all(model, pairs);
  VectorXr weights(scores.size());
  for (Index i = 0; i < scores.size(); ++i) {
    const double p = 1.0 / (1.0 + std::exp(-model.logit(scores[i])));
    weights[i] = p * (1.0 - p);
  }
  fit_precision(model.gp, features, weights);
  return result;
}

std::vector<PairPrediction> predict_pairs(SiameseModel& model, const std::vector<PulsePair>& pairs) {
  require(model.gp.fitted, "predict_pair: GP head has not been fitted");
  std::vector<PairPrediction> out;
  if (pairs.empty()) return out;
  const auto [scores, features] = infer_all(model, pairs);
  const GPPrediction gp = gp_predict_features(model.gp, features, GPTask::regression);
  out.reserve(pairs.size());
  for (Index i = 0; i < scores.size(); ++i)
    out.push_back({mean_field_probability(model.logit(scores[i]), gp.variance[i]), gp.stddev[i], scores[i]});
  return out;
}

PairPrediction predict_pair(SiameseModel& model, const PulsePair& pair) { return predict_pairs(model, {pair}).front(); }

}  // namespace dgpa
