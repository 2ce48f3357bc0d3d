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

struct ContrastiveParams {
  double alpha = 0.5;   // weight of the similar-pair term
  double margin = 1.0;  // target separation for dissimilar pairs
};

/// |sum_i (x1_i^2 - x2_i^2)|.
double similarity_score(const VectorXr& x1, const VectorXr& x2);

/// Elementwise |x1_i^2 - x2_i^2| for embeddings [batch, N]; feeds the dense head.
Var squared_difference(Var x1, Var x2);

/// alpha (1 - y) y'^2 + (1 - alpha) y max(margin - y', 0)^2.
double contrastive_loss(int label, double score, const ContrastiveParams& params);
/// Batch mean of the per-pair loss.
Var contrastive_loss(Var scores, const std::vector<int>& labels, const ContrastiveParams& params);

struct SiameseConfig {
  Index epochs = 20;
  Index batch_size = 32;
  AdamConfig adam{};
  ContrastiveParams contrastive{};
  Index head_units = 128;
  Index rff_dim = 256;
  double length_scale = 1.0;
  double ridge = 1e-3;
  double spectral_bound = 0.95;
  int power_iterations = 1;
  /// Extra power iterations run on every constrained weight after training.
  int final_power_iterations = 50;
};

class SiameseModel {
 public:
  static SiameseModel create(const SiameseConfig& config, RngStream& rng);

  struct Output {
    Var score;     // head output y' per pair, [batch]
    Var features;  // RFF features, [batch, D]
  };
  /// Encodes both sides with the shared encoder; traces are [batch, 1, 256].
  Output forward(Tape& tape, const Tensor& traces_a, const Tensor& traces_b, Mode mode, RngStream& rng);

  /// Logit whose decision boundary sits halfway between the contrastive targets 0 and margin.
  double logit(double score) const { return score - 0.5 * contrastive.margin; }

  std::vector<Parameter*> parameters();
  /// Every spectrally constrained weight (encoder convs, skip projections, dense head).
  std::vector<std::pair<const Parameter*, const SpectralState*>> spectral_weights() const;
  /// Effective (normalized) weight as used by inference-mode forward passes.
  static Tensor effective_weight(const Parameter& weight, const SpectralState& state);

  TensorBundle export_bundle() const;
  static SiameseModel from_bundle(const TensorBundle& bundle);

  Encoder encoder;
  DenseLayer head;
  FeatureNormalizer feature_norm;
  GPHeadState gp;
  ContrastiveParams contrastive;
};

struct PairForward {
  double score;
  VectorXr features;
};
PairForward pair_forward(SiameseModel& model, const PulsePair& pair, Mode mode, RngStream& rng);

struct SiameseTraining {
  SiameseModel model;
  TrainingHistory history;
};

/// Mini-batch Adam on the contrastive loss with spectral normalization, then
/// refines the power iterations and fits the GP precision with Laplace
/// weights p (1 - p). Zero epochs returns the initial model unfitted.
SiameseTraining train_siamese(const std::vector<PulsePair>& pairs, const SiameseConfig& config, RngStream rng);

struct PairPrediction {
  double probability;  // mean-field probability of a normal-anomalous pair
  double uncertainty;  // predictive standard deviation
  double score;
};
PairPrediction predict_pair(SiameseModel& model, const PulsePair& pair);
std::vector<PairPrediction> predict_pairs(SiameseModel& model, const std::vector<PulsePair>& pairs);

/// Stacks pair traces into [n, 1, 256] tensors.
std::pair<Tensor, Tensor> stack_pairs(const std::vector<PulsePair>& pairs, const std::vector<Index>& indices);

}  // namespace dgpa
