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

#include "dgpa/gradsuite.hpp"

#include "dgpa/siamese.hpp"
#include "dgpa/surrogate.hpp"

namespace dgpa {
namespace {

Tensor gaussian(const Shape& shape, RngStream rng, double sigma = 1.0) { return seeded_init(shape, Gaussian{sigma}, rng); }

// Random linear functional of y, so every output element contributes.
Var project(Tape& tape, Var y, RngStream rng) {
  const Index n = y.value().size();
  return sum(mul(reshape(y, {n}), tape.constant(gaussian({n}, rng))));
}

class Suite {
 public:
  Suite(std::uint64_t seed, const GradSuiteSettings& settings) : root_(seed), settings_(settings) {}

  RngStream next() { return root_.split(counter_++); }

  void check(const std::string& name, const std::vector<Parameter*>& params, const ScalarForward& f,
             bool objective = false) {
    const double step = objective ? settings_.objective_step : settings_.step;
    const auto report = finite_diff_check(f, params, Tensor({1}), step, next(), settings_.coordinates);
    Index coords = 0;
    for (const auto& e : report.entries) coords += e.coordinates_checked;
    entries.push_back({name, coords, report.max_relative_error()});
  }

  std::vector<GradSuiteEntry> entries;

 private:
  RngStream root_;
  std::uint64_t counter_ = 0;
  GradSuiteSettings settings_;
};

void primitives(Suite& s) {
  for (Padding padding : {Padding::same, Padding::valid}) {
    Parameter x("x", gaussian({2, 3, 11}, s.next())), w("w", gaussian({4, 3, 3}, s.next())), b("b", gaussian({4}, s.next()));
    const RngStream proj = s.next();
    s.check(padding == Padding::same ? "conv1d_same" : "conv1d_valid", {&x, &w, &b}, [&](Tape& t, const Tensor&) {
      return project(t, conv1d(t.param(x), t.param(w), t.param(b), 2, padding), proj);
    });
  }
  for (Activation act : {Activation::relu, Activation::tanh}) {
    RngStream init = s.next();
    DenseLayer dense("d", 6, 5, act, init);
    Parameter x("x", gaussian({3, 6}, s.next()));
    const RngStream proj = s.next();
    s.check(act == Activation::relu ? "dense_relu" : "dense_tanh", {&x, &dense.weight, &dense.bias},
            [&](Tape& t, const Tensor&) { return project(t, dense.forward(t, t.param(x), Mode::infer), proj); });
  }
  {
    BatchNorm1DLayer bn("bn", 3);
    bn.running_mean = gaussian({3}, s.next()).data();
    bn.running_var = gaussian({3}, s.next()).data().array().abs() + 0.5;
    bn.scale.value = gaussian({3}, s.next());
    bn.shift.value = gaussian({3}, s.next());
    Parameter x("x", gaussian({2, 3, 7}, s.next()));
    const RngStream proj = s.next();
    s.check("batchnorm_infer", {&x, &bn.scale, &bn.shift},
            [&](Tape& t, const Tensor&) { return project(t, bn.forward(t, t.param(x), Mode::infer), proj); });
  }
  {
    Parameter x("x", gaussian({4, 3, 5}, s.next())), g("g", gaussian({3}, s.next())), b("b", gaussian({3}, s.next()));
    const RngStream proj = s.next();
    s.check("batchnorm_batch_statistics", {&x, &g, &b}, [&](Tape& t, const Tensor&) {
      return project(t, batchnorm_train(t.param(x), t.param(g), t.param(b), 1e-5, nullptr, nullptr), proj);
    });
  }
  {
    Parameter x("x", gaussian({2, 3, 11}, s.next()));
    const RngStream proj = s.next();
    s.check("maxpool", {&x}, [&](Tape& t, const Tensor&) { return project(t, maxpool1d(t.param(x), 2), proj); });
  }
  {
    Parameter x("x", gaussian({3, 8}, s.next()));
    const RngStream proj = s.next();
    s.check("dropout_infer", {&x}, [&](Tape& t, const Tensor&) {
      RngStream unused(0);
      return project(t, dropout(t.param(x), 0.1, Mode::infer, unused), proj);
    });
  }
  {
    RngStream init = s.next();
    DenseLayer dense("d", 6, 4, Activation::tanh, init);
    dense.weight.value.data() *= 4.0;  // make the bound active
    dense.enable_spectral(0.95, 1, init);
    Tape warm;
    for (int i = 0; i < 30; ++i) spectral_weight(warm, dense.weight, *dense.spectral, Mode::train);
    Parameter x("x", gaussian({3, 6}, s.next()));
    const RngStream proj = s.next();
    s.check("spectral_dense", {&x, &dense.weight, &dense.bias},
            [&](Tape& t, const Tensor&) { return project(t, dense.forward(t, t.param(x), Mode::infer), proj); });
  }
  {
    RngStream init = s.next();
    Conv1DLayer conv("c", 2, 3, 3, 1, Padding::same, Activation::relu, init);
    conv.weight.value.data() *= 4.0;
    conv.enable_spectral(0.95, 1, init);
    Tape warm;
    for (int i = 0; i < 30; ++i) spectral_weight(warm, conv.weight, *conv.spectral, Mode::train);
    Parameter x("x", gaussian({2, 2, 9}, s.next()));
    const RngStream proj = s.next();
    s.check("spectral_conv", {&x, &conv.weight, &conv.bias},
            [&](Tape& t, const Tensor&) { return project(t, conv.forward(t, t.param(x), Mode::infer), proj); });
  }
  {
    RngStream init = s.next();
    ResNetBlock block("r", 2, 4, 3, 2, 2, 0.05, init);
    block.conv.enable_spectral(0.95, 1, init);
    block.skip.enable_spectral(0.95, 1, init);
    block.norm.running_mean = gaussian({4}, s.next()).data();
    block.norm.running_var = gaussian({4}, s.next()).data().array().abs() + 0.5;
    Parameter x("x", gaussian({2, 2, 16}, s.next()));
    std::vector<Parameter*> ps{&x};
    block.collect(ps);
    const RngStream proj = s.next();
    s.check("resnet_block", ps, [&](Tape& t, const Tensor&) {
      RngStream unused(0);
      return project(t, block.forward(t, t.param(x), Mode::infer, unused), proj);
    });
  }
  {
    RngStream init = s.next();
    ConvStage stage("c", 3, 4, 3, 1, Activation::tanh, 2, 0.1, init);
    stage.norm.running_mean = gaussian({4}, s.next()).data();
    stage.norm.running_var = gaussian({4}, s.next()).data().array().abs() + 0.5;
    Parameter x("x", gaussian({2, 3, 9}, s.next()));
    std::vector<Parameter*> ps{&x};
    stage.collect(ps);
    const RngStream proj = s.next();
    s.check("conv_stage", ps, [&](Tape& t, const Tensor&) {
      RngStream unused(0);
      return project(t, stage.forward(t, t.param(x), Mode::infer, unused), proj);
    });
  }
  {
    FeatureNormalizer norm("n", 5);
    norm.running_mean = gaussian({5}, s.next()).data();
    norm.running_var = 0.7;
    norm.initialized = true;
    Parameter x("x", gaussian({4, 5}, s.next()));
    const RngStream proj = s.next();
    s.check("feature_normalizer", {&x},
            [&](Tape& t, const Tensor&) { return project(t, norm.forward(t, t.param(x), Mode::infer), proj); });
  }
  {
    RngStream init = s.next();
    GPHeadState gp = make_gp_head("gp", 4, 32, 1.0, 1e-3, init);
    gp.beta.value = gaussian({32}, s.next());
    Parameter h("h", gaussian({3, 4}, s.next()));
    const RngStream proj = s.next();
    s.check("rff_features", {&h}, [&](Tape& t, const Tensor&) { return project(t, rff_features(gp.rff, t.param(h)), proj); });
    s.check("gp_forward", {&h, &gp.beta}, [&](Tape& t, const Tensor&) { return project(t, gp_forward(gp, t.param(h)), proj); });
  }
  {
    Parameter a("a", gaussian({3, 6}, s.next())), b("b", gaussian({3, 6}, s.next()));
    const RngStream proj = s.next();
    s.check("squared_difference", {&a, &b},
            [&](Tape& t, const Tensor&) { return project(t, squared_difference(t.param(a), t.param(b)), proj); });
  }
}

void siamese_objective(Suite& s) {
  SiameseConfig c;
  c.head_units = 16;
  c.rff_dim = 32;
  RngStream init = s.next();
  SiameseModel model = SiameseModel::create(c, init);
  const auto pulses = gen_pulses({4, 2, 0}, s.next());
  const auto pairs = make_pairs(pulses, 2, true, s.next());
  std::vector<Index> idx;
  std::vector<int> labels;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    idx.push_back(static_cast<Index>(i));
    labels.push_back(pairs[i].label);
  }
  const auto [a, b] = stack_pairs(pairs, idx);
  {
    // One training-mode pass sets the running statistics as after training.
    Tape warm;
    RngStream unused(0);
    model.forward(warm, a, b, Mode::train, unused);
  }
  s.check("siamese_objective", model.parameters(), [&](Tape& t, const Tensor&) {
    RngStream unused(0);
    return contrastive_loss(model.forward(t, a, b, Mode::infer, unused).score, labels, model.contrastive);
  }, true);
}

void surrogate_objective(Suite& s) {
  SurrogateConfig c;
  c.rff_dim = 16;
  RngStream init = s.next();
  SurrogateModel model = SurrogateModel::create(c, init);
  const auto windows = make_windows(gen_booster_series(21, {}, s.next()));
  model.fit_standardizer(windows);
  const std::vector<Index> idx{0, 1, 2, 3, 4};
  const Tensor inputs = model.standardize(windows, idx);
  VectorXr targets(5);
  for (Index i = 0; i < 5; ++i) targets[i] = windows[static_cast<std::size_t>(i)].target;
  const MatrixXr flat = inputs.matrix(5, kBoosterChannels * kWindowSteps);
  {
    Tape warm;
    RngStream unused(0);
    model.forward(warm, inputs, Mode::train, unused);
  }
  const RngStream pairs = s.next();
  s.check("surrogate_objective", model.parameters(), [&](Tape& t, const Tensor&) {
    RngStream unused(0);
    const auto out = model.forward(t, inputs, Mode::infer, unused);
    const Var penalty = bilipschitz_penalty(flat, out.hidden, model.lipschitz, pairs);
    return add(mape_loss(out.prediction, targets), scale(penalty, model.lipschitz.weight));
  }, true);
}

}  // namespace

std::vector<GradSuiteEntry> run_gradient_suite(std::uint64_t seed, const GradSuiteSettings& settings) {
  Suite s(seed, settings);
  primitives(s);
  siamese_objective(s);
  surrogate_objective(s);
  return std::move(s.entries);
}

}  // namespace dgpa
