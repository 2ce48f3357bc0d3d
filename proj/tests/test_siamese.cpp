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

#include <gtest/gtest.h>

#include <cmath>

#include "dgpa/siamese.hpp"

namespace dgpa {
namespace {

double mean_of(const std::vector<PairPrediction>& preds, double PairPrediction::*field) {
  double s = 0.0;
  for (const auto& p : preds) s += p.*field;
  return s / static_cast<double>(preds.size());
}

VectorXr vec(std::initializer_list<double> v) {
  VectorXr out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

TEST(SimilarityScore, Examples) {
  EXPECT_EQ(similarity_score(vec({0.3, -1.2, 4.0}), vec({0.3, -1.2, 4.0})), 0.0);
  EXPECT_EQ(similarity_score(vec({1, 2}), vec({2, 1})), 0.0);
  EXPECT_EQ(similarity_score(vec({1, 0}), vec({0, 0})), 1.0);
  EXPECT_THROW(similarity_score(vec({1, 0}), vec({0})), ContractViolation);
}

TEST(ContrastiveLoss, Examples) {
  const ContrastiveParams p{0.5, 1.0};
  EXPECT_EQ(contrastive_loss(0, 0.0, p), 0.0);
  EXPECT_EQ(contrastive_loss(1, 1.0, p), 0.0);
  EXPECT_EQ(contrastive_loss(1, 3.0, p), 0.0);
  EXPECT_DOUBLE_EQ(contrastive_loss(0, 0.5, p), 0.125);
  EXPECT_DOUBLE_EQ(contrastive_loss(1, 0.25, p), 0.5 * 0.75 * 0.75);
  EXPECT_THROW(contrastive_loss(0, NAN, p), ContractViolation);
}

TEST(ContrastiveLoss, BatchMeanMatchesScalar) {
  const ContrastiveParams p{0.3, 1.5};
  const std::vector<double> scores{0.1, -0.4, 2.0, 0.7};
  const std::vector<int> labels{0, 1, 1, 0};
  Tape tape;
  Tensor s({4});
  for (Index i = 0; i < 4; ++i) s[i] = scores[static_cast<std::size_t>(i)];
  const double batch = contrastive_loss(tape.constant(s), labels, p).value()[0];
  double expected = 0.0;
  for (std::size_t i = 0; i < 4; ++i) expected += contrastive_loss(labels[i], scores[i], p) / 4.0;
  EXPECT_NEAR(batch, expected, 1e-15);
}

class SiameseForward : public ::testing::Test {
 protected:
  void SetUp() override {
    RngStream rng(3);
    model = SiameseModel::create(SiameseConfig{}, rng);
    pulses = gen_pulses({6, 3, 3}, RngStream(4));
  }
  SiameseModel model;
  std::vector<PulseRecord> pulses;
};

TEST_F(SiameseForward, IdenticalTracesGiveZeroDifference) {
  Tape tape;
  RngStream unused(0);
  const Tensor a = pulses[0].trace.reshaped({1, 1, kPulseLength});
  const Var x1 = model.encoder.forward(tape, tape.constant(a), Mode::infer, unused);
  const Var x2 = model.encoder.forward(tape, tape.constant(a), Mode::infer, unused);
  EXPECT_EQ(squared_difference(x1, x2).value().data().cwiseAbs().maxCoeff(), 0.0);

  // The score is then the head's response to the zero vector.
  const Var zero = tape.constant(Tensor({1, model.encoder.output_width()}));
  const Var h = model.feature_norm.forward(tape, model.head.forward(tape, zero, Mode::infer), Mode::infer);
  const double expected = gp_forward(model.gp, h).value()[0];
  PulsePair pair{a.reshaped({1, kPulseLength}), a.reshaped({1, kPulseLength})};
  EXPECT_DOUBLE_EQ(pair_forward(model, pair, Mode::infer, unused).score, expected);
}

TEST_F(SiameseForward, SwapSymmetricAndDeterministic) {
  RngStream unused(0);
  PulsePair pair{pulses[0].trace.reshaped({1, kPulseLength}), pulses[7].trace.reshaped({1, kPulseLength})};
  PulsePair swapped{pair.trace_b, pair.trace_a};
  const auto f1 = pair_forward(model, pair, Mode::infer, unused);
  const auto f2 = pair_forward(model, swapped, Mode::infer, unused);
  const auto f3 = pair_forward(model, pair, Mode::infer, unused);
  EXPECT_EQ(f1.score, f2.score);
  EXPECT_EQ(f1.features, f2.features);
  EXPECT_EQ(f1.score, f3.score);
  EXPECT_EQ(f1.features.size(), 256);
}

TEST_F(SiameseForward, RejectsWrongTraceLength) {
  RngStream unused(0);
  PulsePair bad{Tensor({1, 100}), Tensor({1, 100})};
  EXPECT_THROW(pair_forward(model, bad, Mode::infer, unused), ContractViolation);
}

TEST_F(SiameseForward, PredictRequiresFittedHead) {
  PulsePair pair{pulses[0].trace.reshaped({1, kPulseLength}), pulses[1].trace.reshaped({1, kPulseLength})};
  EXPECT_THROW(predict_pair(model, pair), ContractViolation);
}

TEST(SiameseTrain, ZeroEpochsIsInitialization) {
  const auto pairs = make_pairs(gen_pulses({6, 3, 0}, RngStream(5)), 5, true, RngStream(6));
  SiameseConfig c;
  c.epochs = 0;
  const auto trained = train_siamese(pairs, c, RngStream(7));
  RngStream init = RngStream(7).split(0);
  const auto fresh = SiameseModel::create(c, init);
  EXPECT_EQ(trained.model.export_bundle(), fresh.export_bundle());
  EXPECT_TRUE(trained.history.empty());
  EXPECT_FALSE(trained.model.gp.fitted);
  EXPECT_EQ(trained.model.gp.precision, MatrixXr::Identity(256, 256) * c.ridge);
}

TEST(SiameseTrain, RefusesSingleLabel) {
  auto pairs = make_pairs(gen_pulses({6, 3, 0}, RngStream(8)), 5, true, RngStream(9));
  std::erase_if(pairs, [](const PulsePair& p) { return p.label == 1; });
  EXPECT_THROW(train_siamese(pairs, SiameseConfig{}, RngStream(10)), ContractViolation);
  EXPECT_THROW(train_siamese({}, SiameseConfig{}, RngStream(10)), ContractViolation);
}

TEST(SiameseTrain, SameSeedBitIdenticalCheckpoints) {
  const auto pairs = make_pairs(gen_pulses({10, 5, 0}, RngStream(11)), 20, true, RngStream(12));
  SiameseConfig c;
  c.epochs = 2;
  const auto a = train_siamese(pairs, c, RngStream(13)), b = train_siamese(pairs, c, RngStream(13));
  EXPECT_EQ(encode_checkpoint(a.model.export_bundle()), encode_checkpoint(b.model.export_bundle()));
  EXPECT_EQ(a.history, b.history);
  const auto other = train_siamese(pairs, c, RngStream(14));
  EXPECT_NE(encode_checkpoint(a.model.export_bundle()), encode_checkpoint(other.model.export_bundle()));
}

TEST(SiameseTrain, CheckpointRoundTripPredictsIdentically) {
  const auto pulses = gen_pulses({10, 5, 0}, RngStream(15));
  const auto pairs = make_pairs(pulses, 20, true, RngStream(16));
  SiameseConfig c;
  c.epochs = 1;
  auto trained = train_siamese(pairs, c, RngStream(17));
  auto restored = SiameseModel::from_bundle(decode_checkpoint(encode_checkpoint(trained.model.export_bundle())));
  const auto p1 = predict_pairs(trained.model, pairs), p2 = predict_pairs(restored, pairs);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    EXPECT_EQ(p1[i].probability, p2[i].probability);
    EXPECT_EQ(p1[i].uncertainty, p2[i].uncertainty);
  }
}

// Seeded benchmark: 200 pairs per label from normal and seen-type pulses, 20 epochs.
class SiameseBenchmark : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    const auto train = gen_pulses({200, 100, 0}, RngStream(11));
    test_pulses = new std::vector<PulseRecord>(gen_pulses({200, 100, 100}, RngStream(12)));
    SiameseConfig c;
    c.epochs = 20;
    result = new SiameseTraining(train_siamese(make_pairs(train, 200, true, RngStream(13)), c, RngStream(14)));
  }
  static void TearDownTestSuite() {
    delete result;
    delete test_pulses;
  }
  static SiameseTraining* result;
  static std::vector<PulseRecord>* test_pulses;
};
SiameseTraining* SiameseBenchmark::result = nullptr;
std::vector<PulseRecord>* SiameseBenchmark::test_pulses = nullptr;

TEST_F(SiameseBenchmark, LossHalves) {
  ASSERT_EQ(result->history.size(), 20u);
  EXPECT_LT(result->history.back(), 0.5 * result->history.front());
}

TEST_F(SiameseBenchmark, SpectralBoundHolds) {
  for (const auto& [w, s] : result->model.spectral_weights())
    EXPECT_LE(spectral_norm_estimate(SiameseModel::effective_weight(*w, *s)), 0.95 * 1.001) << w->name;
}

TEST_F(SiameseBenchmark, IdenticalNormalPairsLookSimilar) {
  std::vector<PulsePair> same;
  for (const auto& p : *test_pulses)
    if (p.pulse_class == PulseClass::normal && same.size() < 50)
      same.push_back({p.trace.reshaped({1, kPulseLength}), p.trace.reshaped({1, kPulseLength})});
  for (const auto& pred : predict_pairs(result->model, same)) EXPECT_LT(pred.probability, 0.5);
}

TEST_F(SiameseBenchmark, SeenAnomalyPairsLookDissimilar) {
  const auto pa = make_pairs_with(*test_pulses, PulseClass::anomaly_a, 200, RngStream(16));
  EXPECT_GT(mean_of(predict_pairs(result->model, pa), &PairPrediction::probability), 0.5);
}

TEST_F(SiameseBenchmark, UnseenAnomaliesAreMoreUncertain) {
  const auto pa = make_pairs_with(*test_pulses, PulseClass::anomaly_a, 200, RngStream(16));
  const auto pb = make_pairs_with(*test_pulses, PulseClass::anomaly_b, 200, RngStream(17));
  EXPECT_GT(mean_of(predict_pairs(result->model, pb), &PairPrediction::uncertainty),
            mean_of(predict_pairs(result->model, pa), &PairPrediction::uncertainty));
}

TEST_F(SiameseBenchmark, PredictionsPureAndInRange) {
  const auto nn = make_pairs_with(*test_pulses, PulseClass::normal, 20, RngStream(15));
  const auto a = predict_pairs(result->model, nn), b = predict_pairs(result->model, nn);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].probability, b[i].probability);
    // Batch composition changes GEMM blocking, so only last-bit agreement is expected.
    EXPECT_NEAR(predict_pair(result->model, nn[i]).uncertainty, a[i].uncertainty, 1e-12);
    EXPECT_GT(a[i].probability, 0.0);
    EXPECT_LT(a[i].probability, 1.0);
    EXPECT_GE(a[i].uncertainty, 0.0);
  }
}

TEST(SiameseGradCheck, FullObjectiveInference) {
  RngStream rng(20);
  SiameseConfig c;
  c.head_units = 16;
  c.rff_dim = 32;
  auto model = SiameseModel::create(c, rng);
  const auto pulses = gen_pulses({4, 2, 0}, RngStream(21));
  const auto pairs = make_pairs(pulses, 2, true, RngStream(22));
  std::vector<Index> idx(pairs.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<Index>(i);
  const auto [a, b] = stack_pairs(pairs, idx);
  std::vector<int> labels;
  for (const auto& p : pairs) labels.push_back(p.label);
  // Fix the normalizer statistics at a training batch, as after training.
  {
    Tape warm;
    RngStream unused(0);
    model.forward(warm, a, b, Mode::train, unused);
  }
  const std::vector<Parameter*> params = model.parameters();
  const ScalarForward f = [&](Tape& t, const Tensor&) {
    RngStream unused(0);
    return contrastive_loss(model.forward(t, a, b, Mode::infer, unused).score, labels, model.contrastive);
  };
  const auto r = finite_diff_check(f, params, Tensor({1}), 1e-6, RngStream(23), 32);
  EXPECT_GT(r.entries.size(), 20u);
  EXPECT_TRUE(r.passed(1e-4)) << r.max_relative_error();
}

}  // namespace
}  // namespace dgpa
