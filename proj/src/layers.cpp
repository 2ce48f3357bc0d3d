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

#include "dgpa/layers.hpp"

#include <cmath>

#include "dgpa/linalg.hpp"
#include "dgpa/optim.hpp"

namespace dgpa {

Var activate(Var x, Activation activation) {
  switch (activation) {
    case Activation::relu:
      return relu(x);
    case Activation::tanh:
      return tanh(x);
    case Activation::none:
      break;
  }
  return x;
}

namespace {

VectorXr random_unit(Index n, RngStream& rng) {
  VectorXr x(n);
  for (Index i = 0; i < n; ++i) x[i] = rng.gaussian();
  return x / x.norm();
}

InitScheme init_for(Activation activation, Index fan_in) {
  if (activation == Activation::relu) return FanInScaled{};
  return Gaussian{std::sqrt(1.0 / static_cast<double>(fan_in))};
}

void export_spectral(TensorBundle& bundle, const std::string& name, const std::optional<SpectralState>& s) {
  if (!s) return;
  bundle[name + ".sn_u"] = Tensor::from_vector(s->u);
  bundle[name + ".sn_v"] = Tensor::from_vector(s->v);
  bundle[name + ".sn_config"] = Tensor({3}, {s->bound, static_cast<double>(s->iterations_per_step), s->last_sigma});
}

void import_spectral(const TensorBundle& bundle, const std::string& name, std::optional<SpectralState>& s) {
  if (!bundle.contains(name + ".sn_u")) {
    s.reset();
    return;
  }
  SpectralState state;
  state.u = bundle_get(bundle, name + ".sn_u").data();
  state.v = bundle_get(bundle, name + ".sn_v").data();
  const Tensor& cfg = bundle_get(bundle, name + ".sn_config", {3});
  state.bound = cfg[0];
  state.iterations_per_step = static_cast<int>(cfg[1]);
  state.last_sigma = cfg[2];
  s = std::move(state);
}

void import_param(const TensorBundle& bundle, Parameter& p) {
  p.value = bundle_get(bundle, p.name, p.value.shape());
}

}  // namespace

SpectralState SpectralState::random(Index rows, Index cols, double bound, int iterations, RngStream& rng) {
  require(bound > 0.0, "spectral bound must be positive");
  require(iterations >= 1, "spectral power iterations must be >= 1");
  SpectralState s;
  s.u = random_unit(rows, rng);
  s.v = random_unit(cols, rng);
  s.bound = bound;
  s.iterations_per_step = iterations;
  return s;
}

Tensor spectral_normalize(const Tensor& weight, SpectralState& state) {
  const Index rows = weight.dim(0), cols = weight.size() / rows;
  require(state.u.size() == rows && state.v.size() == cols,
          "spectral_normalize: state vectors do not match weight " + shape_string(weight.shape()));
  const auto w = weight.matrix(rows, cols);
  const double sigma = std::max(0.0, power_iteration(w, state.u, state.v, state.iterations_per_step));
  state.last_sigma = sigma;
  Tensor out = weight;
  if (sigma > state.bound) out.data() *= state.bound / sigma;
  return out;
}

Var spectral_weight(Tape& tape, Parameter& weight, SpectralState& state, Mode mode) {
  const Index rows = weight.value.dim(0), cols = weight.value.size() / rows;
  if (mode == Mode::train) {
    const auto w = weight.value.matrix(rows, cols);
    state.last_sigma = std::max(0.0, power_iteration(w, state.u, state.v, state.iterations_per_step));
  }
  return spectral_scale(tape.param(weight), state.u, state.v, state.bound);
}

double spectral_norm_estimate(const Tensor& weight, int iterations) {
  const Index rows = weight.dim(0), cols = weight.size() / rows;
  // Fixed start vector keeps the estimate deterministic.
  VectorXr u = VectorXr::Ones(rows) / std::sqrt(static_cast<double>(rows));
  VectorXr v = VectorXr::Ones(cols) / std::sqrt(static_cast<double>(cols));
  return std::abs(power_iteration(weight.matrix(rows, cols), u, v, iterations));
}

Var dropout(Var x, double rate, Mode mode, RngStream& rng) {
  require(rate >= 0.0 && rate < 1.0, "dropout rate must lie in [0, 1)");
  if (mode != Mode::train || rate == 0.0) return x;
  Tensor mask(x.shape());
  const double keep_scale = 1.0 / (1.0 - rate);
  for (Index i = 0; i < mask.size(); ++i) mask[i] = rng.uniform() < rate ? 0.0 : keep_scale;
  return mul(x, x.tape().constant(std::move(mask)));
}

Conv1DLayer::Conv1DLayer(std::string name, Index in_channels, Index filters, Index kernel, Index stride_,
                         Padding padding_, Activation init, RngStream& rng)
    : stride(stride_), padding(padding_) {
  require(in_channels > 0 && filters > 0 && kernel > 0 && stride_ > 0, "conv layer dimensions must be positive");
  weight = Parameter(name + ".weight",
                     seeded_init({filters, in_channels, kernel}, init_for(init, in_channels * kernel), rng));
  bias = Parameter(name + ".bias", Tensor({filters}));
}

void Conv1DLayer::enable_spectral(double bound, int iterations, RngStream& rng) {
  spectral = SpectralState::random(filters(), in_channels() * kernel(), bound, iterations, rng);
}

Var Conv1DLayer::forward(Tape& tape, Var x, Mode mode) {
  const Var w = spectral ? spectral_weight(tape, weight, *spectral, mode) : tape.param(weight);
  return conv1d(x, w, tape.param(bias), stride, padding);
}

Index Conv1DLayer::out_length(Index in_length) const {
  return conv_geometry(in_length, kernel(), stride, padding).out_length;
}

void Conv1DLayer::export_to(TensorBundle& bundle) const {
  bundle[weight.name] = weight.value;
  bundle[bias.name] = bias.value;
  export_spectral(bundle, weight.name, spectral);
}

void Conv1DLayer::import_from(const TensorBundle& bundle) {
  import_param(bundle, weight);
  import_param(bundle, bias);
  import_spectral(bundle, weight.name, spectral);
}

DenseLayer::DenseLayer(std::string name, Index in_features, Index out_features, Activation activation_,
                       RngStream& rng)
    : activation(activation_) {
  require(in_features > 0 && out_features > 0, "dense layer dimensions must be positive");
  weight = Parameter(name + ".weight", seeded_init({out_features, in_features}, init_for(activation_, in_features), rng));
  bias = Parameter(name + ".bias", Tensor({out_features}));
}

void DenseLayer::enable_spectral(double bound, int iterations, RngStream& rng) {
  spectral = SpectralState::random(out_features(), in_features(), bound, iterations, rng);
}

Var DenseLayer::forward(Tape& tape, Var x, Mode mode) {
  require(x.value().rank() == 2 && x.dim(1) == in_features(),
          "dense: expected [batch, " + std::to_string(in_features()) + "], got " + shape_string(x.shape()));
  const Var w = spectral ? spectral_weight(tape, weight, *spectral, mode) : tape.param(weight);
  return activate(add_row_vector(matmul_nt(x, w), tape.param(bias)), activation);
}

void DenseLayer::export_to(TensorBundle& bundle) const {
  bundle[weight.name] = weight.value;
  bundle[bias.name] = bias.value;
  export_spectral(bundle, weight.name, spectral);
}

void DenseLayer::import_from(const TensorBundle& bundle) {
  import_param(bundle, weight);
  import_param(bundle, bias);
  import_spectral(bundle, weight.name, spectral);
}

BatchNorm1DLayer::BatchNorm1DLayer(std::string name_, Index channels, bool affine_)
    : name(std::move(name_)),
      scale(name + ".scale", Tensor({channels}, 1.0), affine_),
      shift(name + ".shift", Tensor({channels}), affine_),
      running_mean(VectorXr::Zero(channels)),
      running_var(VectorXr::Ones(channels)),
      affine(affine_) {}

Var BatchNorm1DLayer::forward(Tape& tape, Var x, Mode mode) {
  require(x.value().rank() >= 2 && x.dim(1) == channels(),
          "batchnorm: expected " + std::to_string(channels()) + " channels, got " + shape_string(x.shape()));
  const Var gamma = affine ? tape.param(scale) : tape.constant(scale.value);
  const Var beta = affine ? tape.param(shift) : tape.constant(shift.value);
  if (mode == Mode::train) {
    require(x.dim(0) >= 2, "batchnorm: training mode needs a batch of at least 2");
    VectorXr mu, var;
    const Var y = batchnorm_train(x, gamma, beta, eps, &mu, &var);
    running_mean = momentum * running_mean + (1.0 - momentum) * mu;
    running_var = momentum * running_var + (1.0 - momentum) * var;
    return y;
  }
  if (mode == Mode::calibrate) {
    VectorXr mu, var;
    const Var y = batchnorm_train(x, gamma, beta, eps, &mu, &var);
    const Index n = x.dim(0);
    const double w = static_cast<double>(n) / static_cast<double>(calibration_count + n);
    if (calibration_count == 0) {
      running_mean = mu;
      running_var = var;
    } else {
      running_mean += w * (mu - running_mean);
      running_var += w * (var - running_var);
    }
    calibration_count += n;
    return y;
  }
  const VectorXr inv_std = (running_var.array() + eps).rsqrt().matrix();
  Var centered = add_channel_vector(x, tape.constant(Tensor::from_vector(-running_mean)));
  Var normalized = mul_channel_vector(centered, tape.constant(Tensor::from_vector(inv_std)));
  return add_channel_vector(mul_channel_vector(normalized, gamma), beta);
}

void BatchNorm1DLayer::export_to(TensorBundle& bundle) const {
  bundle[scale.name] = scale.value;
  bundle[shift.name] = shift.value;
  bundle[name + ".running_mean"] = Tensor::from_vector(running_mean);
  bundle[name + ".running_var"] = Tensor::from_vector(running_var);
}

void BatchNorm1DLayer::import_from(const TensorBundle& bundle) {
  import_param(bundle, scale);
  import_param(bundle, shift);
  running_mean = bundle_get(bundle, name + ".running_mean", {channels()}).data();
  running_var = bundle_get(bundle, name + ".running_var", {channels()}).data();
}

FeatureNormalizer::FeatureNormalizer(std::string name_, Index width)
    : name(std::move(name_)), running_mean(VectorXr::Zero(width)) {
  require(width > 0, "feature normalizer width must be positive");
}

Var FeatureNormalizer::forward(Tape& tape, Var x, Mode mode) {
  require(x.value().rank() == 2 && x.dim(1) == width(),
          "feature normalizer: expected [batch, " + std::to_string(width()) + "], got " + shape_string(x.shape()));
  if (mode == Mode::train) {
    require(x.dim(0) >= 2, "feature normalizer: batch statistics need at least 2 rows");
    const auto v = x.value().matrix();
    const VectorXr mu = v.colwise().mean().transpose();
    const double var = (v.rowwise() - mu.transpose()).squaredNorm() / static_cast<double>(v.size());
    const double keep = initialized ? momentum : 0.0;
    running_mean = keep * running_mean + (1.0 - keep) * mu;
    running_var = keep * running_var + (1.0 - keep) * var;
    initialized = true;
  }
  const double norm = 1.0 / std::sqrt(static_cast<double>(width()) * (running_var + eps));
  return scale(add_row_vector(x, tape.constant(Tensor::from_vector(-running_mean))), norm);
}

void FeatureNormalizer::export_to(TensorBundle& bundle) const {
  bundle[name + ".running_mean"] = Tensor::from_vector(running_mean);
  bundle[name + ".running_var"] = Tensor({1}, {running_var});
  bundle[name + ".initialized"] = Tensor({1}, {initialized ? 1.0 : 0.0});
}

void FeatureNormalizer::import_from(const TensorBundle& bundle) {
  running_mean = bundle_get(bundle, name + ".running_mean", {width()}).data();
  running_var = bundle_get(bundle, name + ".running_var", {1})[0];
  initialized = bundle_get(bundle, name + ".initialized", {1})[0] != 0.0;
}

ResNetBlock::ResNetBlock(std::string name, Index in_channels, Index filters, Index kernel, Index stride, Index pool_,
                         double dropout_rate_, RngStream& rng)
    : conv(name + ".conv", in_channels, filters, kernel, stride, Padding::same, Activation::relu, rng),
      norm(name + ".norm", filters),
      skip(name + ".skip", in_channels, filters, 1, stride, Padding::same, Activation::none, rng),
      pool(pool_),
      dropout_rate(dropout_rate_) {}

Var ResNetBlock::forward(Tape& tape, Var x, Mode mode, RngStream& rng) {
  Var main = relu(maxpool1d(norm.forward(tape, conv.forward(tape, x, mode), mode), pool));
  Var shortcut = maxpool1d(skip.forward(tape, x, mode), pool);
  if (main.shape() != shortcut.shape())
    throw std::logic_error("resnet block: skip path " + shape_string(shortcut.shape()) + " does not match main path " +
                           shape_string(main.shape()));
  return dropout(add(main, shortcut), dropout_rate, mode, rng);
}

void ResNetBlock::collect(std::vector<Parameter*>& out) {
  conv.collect(out);
  norm.collect(out);
  skip.collect(out);
}

void ResNetBlock::export_to(TensorBundle& bundle) const {
  conv.export_to(bundle);
  norm.export_to(bundle);
  skip.export_to(bundle);
}

void ResNetBlock::import_from(const TensorBundle& bundle) {
  conv.import_from(bundle);
  norm.import_from(bundle);
  skip.import_from(bundle);
}

ConvStage::ConvStage(std::string name, Index in_channels, Index filters, Index kernel, Index stride,
                     Activation activation_, Index pool_, double dropout_rate_, RngStream& rng)
    : conv(name + ".conv", in_channels, filters, kernel, stride, Padding::same, activation_, rng),
      activation(activation_),
      norm(name + ".norm", filters),
      pool(pool_),
      dropout_rate(dropout_rate_) {}

Var ConvStage::forward(Tape& tape, Var x, Mode mode, RngStream& rng) {
  Var y = activate(conv.forward(tape, x, mode), activation);
  y = maxpool1d(norm.forward(tape, y, mode), pool);
  return dropout(y, dropout_rate, mode, rng);
}

void ConvStage::collect(std::vector<Parameter*>& out) {
  conv.collect(out);
  norm.collect(out);
}

void ConvStage::export_to(TensorBundle& bundle) const {
  conv.export_to(bundle);
  norm.export_to(bundle);
}

void ConvStage::import_from(const TensorBundle& bundle) {
  conv.import_from(bundle);
  norm.import_from(bundle);
}

ArchitectureSpec ArchitectureSpec::siamese() {
  ArchitectureSpec spec;
  for (Index filters : {16, 32, 64, 128})
    spec.stages.push_back(StageSpec{StageSpec::Kind::resnet_block, filters, 3, 2, 2, Activation::relu, 0.05});
  spec.spectral = true;
  return spec;
}

ArchitectureSpec ArchitectureSpec::surrogate() {
  ArchitectureSpec spec;
  for (int i = 0; i < 3; ++i)
    spec.stages.push_back(StageSpec{StageSpec::Kind::conv_stage, 256, 3, 1, 2, Activation::tanh, 0.1});
  spec.dense_units = 256;
  spec.dense_activation = Activation::tanh;
  return spec;
}

Encoder build_encoder(const ArchitectureSpec& spec, Index input_channels, Index input_length, RngStream& rng,
                      const std::string& name) {
  require(!spec.stages.empty(), "build_encoder: architecture has no stages");
  require(input_channels > 0 && input_length > 0, "build_encoder: input dimensions must be positive");
  Encoder enc;
  enc.input_channels_ = input_channels;
  enc.input_length_ = input_length;
  enc.stages_.reserve(spec.stages.size());
  Index channels = input_channels, length = input_length;
  for (std::size_t i = 0; i < spec.stages.size(); ++i) {
    const StageSpec& s = spec.stages[i];
    require(s.filters > 0 && s.kernel > 0 && s.stride > 0 && s.pool > 0,
            "build_encoder: stage " + std::to_string(i) + " has a nonpositive dimension");
    if (length < s.stride * s.pool)
      throw ContractViolation("build_encoder: input length " + std::to_string(input_length) +
                              " is too short; stage " + std::to_string(i) + " receives length " +
                              std::to_string(length) + " but needs at least stride*pool = " +
                              std::to_string(s.stride * s.pool));
    const std::string stage_name = name + "." + std::to_string(i);
    if (s.kind == StageSpec::Kind::resnet_block) {
      ResNetBlock block(stage_name, channels, s.filters, s.kernel, s.stride, s.pool, s.dropout, rng);
      if (spec.spectral) {
        block.conv.enable_spectral(spec.spectral_bound, spec.power_iterations, rng);
        block.skip.enable_spectral(spec.spectral_bound, spec.power_iterations, rng);
      }
      enc.stages_.emplace_back(std::move(block));
    } else {
      ConvStage stage(stage_name, channels, s.filters, s.kernel, s.stride, s.activation, s.pool, s.dropout, rng);
      if (spec.spectral) stage.conv.enable_spectral(spec.spectral_bound, spec.power_iterations, rng);
      enc.stages_.emplace_back(std::move(stage));
    }
    channels = s.filters;
    length = conv_geometry(length, s.kernel, s.stride, Padding::same).out_length;
    length = (length + s.pool - 1) / s.pool;
  }
  enc.output_width_ = channels * length;
  if (spec.dense_units > 0) {
    enc.dense_.emplace(name + ".dense", enc.output_width_, spec.dense_units, spec.dense_activation, rng);
    if (spec.spectral) enc.dense_->enable_spectral(spec.spectral_bound, spec.power_iterations, rng);
    enc.output_width_ = spec.dense_units;
  }
  return enc;
}

Var Encoder::forward(Tape& tape, Var x, Mode mode, RngStream& rng) {
  require(x.value().rank() == 3 && x.dim(1) == input_channels_ && x.dim(2) == input_length_,
          "encoder: expected [batch, " + std::to_string(input_channels_) + ", " + std::to_string(input_length_) +
              "], got " + shape_string(x.shape()));
  for (Stage& stage : stages_)
    x = std::visit([&](auto& s) { return s.forward(tape, x, mode, rng); }, stage);
  const Index batch = x.dim(0);
  x = reshape(x, {batch, x.value().size() / batch});
  if (dense_) x = dense_->forward(tape, x, mode);
  return x;
}

std::vector<Parameter*> Encoder::parameters() {
  std::vector<Parameter*> out;
  for (Stage& stage : stages_) std::visit([&](auto& s) { s.collect(out); }, stage);
  if (dense_) dense_->collect(out);
  return out;
}

std::vector<std::pair<const Parameter*, const SpectralState*>> Encoder::spectral_weights() const {
  std::vector<std::pair<const Parameter*, const SpectralState*>> out;
  auto add_conv = [&](const Conv1DLayer& c) {
    if (c.spectral) out.emplace_back(&c.weight, &*c.spectral);
  };
  for (const Stage& stage : stages_) {
    if (const auto* b = std::get_if<ResNetBlock>(&stage)) {
      add_conv(b->conv);
      add_conv(b->skip);
    } else {
      add_conv(std::get<ConvStage>(stage).conv);
    }
  }
  if (dense_ && dense_->spectral) out.emplace_back(&dense_->weight, &*dense_->spectral);
  return out;
}

std::vector<BatchNorm1DLayer*> Encoder::batchnorm_layers() {
  std::vector<BatchNorm1DLayer*> out;
  for (Stage& stage : stages_) std::visit([&](auto& s) { out.push_back(&s.norm); }, stage);
  return out;
}

void reset_calibration(const std::vector<BatchNorm1DLayer*>& layers) {
  for (BatchNorm1DLayer* layer : layers) layer->calibration_count = 0;
}

void Encoder::export_to(TensorBundle& bundle) const {
  for (const Stage& stage : stages_) std::visit([&](const auto& s) { s.export_to(bundle); }, stage);
  if (dense_) dense_->export_to(bundle);
}

void Encoder::import_from(const TensorBundle& bundle) {
  for (Stage& stage : stages_) std::visit([&](auto& s) { s.import_from(bundle); }, stage);
  if (dense_) dense_->import_from(bundle);
}

}  // namespace dgpa
