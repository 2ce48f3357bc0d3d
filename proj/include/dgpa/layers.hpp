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

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dgpa/autodiff.hpp"
#include "dgpa/checkpoint.hpp"

namespace dgpa {

/// calibrate: dropout off and spectral state frozen as in infer, but batchnorm
/// normalizes with batch statistics and accumulates them into the running
/// statistics as an equally weighted cumulative average.
enum class Mode { train, infer, calibrate };
enum class Activation { none, relu, tanh };

Var activate(Var x, Activation activation);

/// Warm-started power-iteration state for one constrained weight.
struct SpectralState {
  VectorXr u;  // left singular vector estimate, length = out features
  VectorXr v;  // right singular vector estimate, length = everything else
  double bound = 0.95;
  int iterations_per_step = 1;
  double last_sigma = 0.0;

  static SpectralState random(Index rows, Index cols, double bound, int iterations, RngStream& rng);
};

/// Power-iterates `state` on the (rows x rest) view of `weight` and returns
/// weight * min(1, bound / sigma). A zero weight is returned unscaled.
Tensor spectral_normalize(const Tensor& weight, SpectralState& state);

/// Spectral-normalized weight on the tape. Train mode advances the power
/// iteration; infer mode reuses the stored vectors.
Var spectral_weight(Tape& tape, Parameter& weight, SpectralState& state, Mode mode);

/// Largest singular value of the (rows x rest) view, by cold-started power iteration.
double spectral_norm_estimate(const Tensor& weight, int iterations = 500);

/// Drops every element with probability `rate` and rescales survivors by 1 / (1 - rate).
Var dropout(Var x, double rate, Mode mode, RngStream& rng);

class Conv1DLayer {
 public:
  Conv1DLayer() = default;
  Conv1DLayer(std::string name, Index in_channels, Index filters, Index kernel, Index stride, Padding padding,
              Activation init_for, RngStream& rng);

  Var forward(Tape& tape, Var x, Mode mode);
  void enable_spectral(double bound, int iterations, RngStream& rng);

  Index out_length(Index in_length) const;
  Index filters() const { return weight.value.dim(0); }
  Index in_channels() const { return weight.value.dim(1); }
  Index kernel() const { return weight.value.dim(2); }

  void collect(std::vector<Parameter*>& out) { out.insert(out.end(), {&weight, &bias}); }
  void export_to(TensorBundle& bundle) const;
  void import_from(const TensorBundle& bundle);

  Parameter weight;  // [filters, in_channels, kernel]
  Parameter bias;    // [filters]
  Index stride = 1;
  Padding padding = Padding::same;
  std::optional<SpectralState> spectral;
};

class DenseLayer {
 public:
  DenseLayer() = default;
  DenseLayer(std::string name, Index in_features, Index out_features, Activation activation, RngStream& rng);

  Var forward(Tape& tape, Var x, Mode mode);
  void enable_spectral(double bound, int iterations, RngStream& rng);

  Index in_features() const { return weight.value.dim(1); }
  Index out_features() const { return weight.value.dim(0); }

  void collect(std::vector<Parameter*>& out) { out.insert(out.end(), {&weight, &bias}); }
  void export_to(TensorBundle& bundle) const;
  void import_from(const TensorBundle& bundle);

  Parameter weight;  // [out, in]
  Parameter bias;    // [out]
  Activation activation = Activation::none;
  std::optional<SpectralState> spectral;
};

/// Per-channel normalization over axes {0, 2} of [batch, channels, length]
/// (or axis 0 of [batch, channels]).
class BatchNorm1DLayer {
 public:
  BatchNorm1DLayer() = default;
  BatchNorm1DLayer(std::string name, Index channels, bool affine = true);

  Var forward(Tape& tape, Var x, Mode mode);

  Index channels() const { return scale.value.size(); }
  void collect(std::vector<Parameter*>& out) {
    if (affine) out.insert(out.end(), {&scale, &shift});
  }
  void export_to(TensorBundle& bundle) const;
  void import_from(const TensorBundle& bundle);

  std::string name;
  Parameter scale;
  Parameter shift;
  VectorXr running_mean;
  VectorXr running_var;
  double momentum = 0.99;
  double eps = 1e-5;
  bool affine = true;
  /// Samples folded into the running statistics since the last reset (calibrate mode).
  Index calibration_count = 0;
};

/// Centers each feature and applies one shared scale so the mean squared row
/// norm of the training features is 1. Unlike per-feature batchnorm it keeps
/// the relative geometry of the feature space. The running statistics are
/// always applied as constants; train mode updates them from the batch
/// (the first batch initializes them), so train and infer outputs agree.
class FeatureNormalizer {
 public:
  FeatureNormalizer() = default;
  FeatureNormalizer(std::string name, Index width);

  /// [batch, width] -> [batch, width].
  Var forward(Tape& tape, Var x, Mode mode);

  Index width() const { return running_mean.size(); }
  void export_to(TensorBundle& bundle) const;
  void import_from(const TensorBundle& bundle);

  std::string name;
  VectorXr running_mean;
  double running_var = 1.0;  // mean over features of the per-feature variance
  double momentum = 0.99;
  double eps = 1e-5;
  bool initialized = false;
};

/// conv -> batchnorm -> maxpool -> relu, plus a 1x1 strided-and-pooled skip
/// projection, summed and followed by dropout.
class ResNetBlock {
 public:
  ResNetBlock() = default;
  ResNetBlock(std::string name, Index in_channels, Index filters, Index kernel, Index stride, Index pool,
              double dropout_rate, RngStream& rng);

  Var forward(Tape& tape, Var x, Mode mode, RngStream& rng);

  void collect(std::vector<Parameter*>& out);
  void export_to(TensorBundle& bundle) const;
  void import_from(const TensorBundle& bundle);

  Conv1DLayer conv;
  BatchNorm1DLayer norm;
  Conv1DLayer skip;
  Index pool = 2;
  double dropout_rate = 0.05;
};

/// conv(+activation) -> batchnorm -> maxpool -> dropout.
class ConvStage {
 public:
  ConvStage() = default;
  ConvStage(std::string name, Index in_channels, Index filters, Index kernel, Index stride, Activation activation,
            Index pool, double dropout_rate, RngStream& rng);

  Var forward(Tape& tape, Var x, Mode mode, RngStream& rng);

  void collect(std::vector<Parameter*>& out);
  void export_to(TensorBundle& bundle) const;
  void import_from(const TensorBundle& bundle);

  Conv1DLayer conv;
  Activation activation = Activation::tanh;
  BatchNorm1DLayer norm;
  Index pool = 2;
  double dropout_rate = 0.1;
};

struct StageSpec {
  enum class Kind { resnet_block, conv_stage };
  Kind kind = Kind::resnet_block;
  Index filters = 16;
  Index kernel = 3;
  Index stride = 2;
  Index pool = 2;
  Activation activation = Activation::relu;
  double dropout = 0.05;
};

/// Architecture descriptor for an encoder trunk.
struct ArchitectureSpec {
  std::vector<StageSpec> stages;
  Index dense_units = 0;  // 0 = no trailing dense layer
  Activation dense_activation = Activation::none;
  bool spectral = false;
  double spectral_bound = 0.95;
  int power_iterations = 1;

  /// Four ResNet blocks with 16/32/64/128 filters, kernel 3, stride 2, pool 2, dropout 0.05.
  static ArchitectureSpec siamese();
  /// Three conv(256, k3, tanh) stages with batchnorm, pool 2, dropout 0.1, then dense(256, tanh).
  static ArchitectureSpec surrogate();
};

class Encoder {
 public:
  /// [batch, channels, length] -> [batch, output_width].
  Var forward(Tape& tape, Var x, Mode mode, RngStream& rng);

  Index input_channels() const { return input_channels_; }
  Index input_length() const { return input_length_; }
  Index output_width() const { return output_width_; }

  std::vector<Parameter*> parameters();
  /// Every weight carrying a spectral constraint, with its state.
  std::vector<std::pair<const Parameter*, const SpectralState*>> spectral_weights() const;
  std::vector<BatchNorm1DLayer*> batchnorm_layers();
  void export_to(TensorBundle& bundle) const;
  void import_from(const TensorBundle& bundle);

 private:
  friend Encoder build_encoder(const ArchitectureSpec&, Index, Index, RngStream&, const std::string&);
  using Stage = std::variant<ResNetBlock, ConvStage>;
  std::vector<Stage> stages_;
  std::optional<DenseLayer> dense_;
  Index input_channels_ = 0;
  Index input_length_ = 0;
  Index output_width_ = 0;
};

/// Zeroes the calibration counters so the next calibrate-mode passes replace
/// the running statistics.
void reset_calibration(const std::vector<BatchNorm1DLayer*>& layers);

/// Validates shape propagation over the whole stack and allocates parameters.
Encoder build_encoder(const ArchitectureSpec& spec, Index input_channels, Index input_length, RngStream& rng,
                      const std::string& name = "encoder");

}  // namespace dgpa
