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

#include "dgpa/layers.hpp"
#include "dgpa/linalg.hpp"
#include "dgpa/optim.hpp"

namespace dgpa {
namespace {

Tensor gaussian_tensor(const Shape& shape, std::uint64_t seed, double sigma = 1.0) {
  RngStream rng(seed);
  return seeded_init(shape, Gaussian{sigma}, rng);
}

// Hand-rolled cross-correlation with TF-style same padding.
Tensor reference_conv(const Tensor& x, const Tensor& w, const Tensor& b, Index stride) {
  const Index n = x.dim(0), c = x.dim(1), len = x.dim(2), f = w.dim(0), k = w.dim(2);
  const Index out = (len + stride - 1) / stride;
  const Index pad_total = std::max<Index>(0, (out - 1) * stride + k - len);
  const Index pad_left = pad_total / 2;
  Tensor y({n, f, out});
  for (Index i = 0; i < n; ++i)
    for (Index o = 0; o < f; ++o)
      for (Index t = 0; t < out; ++t) {
        double acc = b[o];
        for (Index ch = 0; ch < c; ++ch)
          for (Index j = 0; j < k; ++j) {
            const Index src = t * stride + j - pad_left;
            if (src >= 0 && src < len) acc += w[(o * c + ch) * k + j] * x[(i * c + ch) * len + src];
          }
        y[(i * f + o) * out + t] = acc;
      }
  return y;
}

TEST(Conv1D, IdentityKernel) {
  Tape tape;
  const Tensor x({1, 1, 4}, {1.0, -2.0, 3.0, 0.5});
  const Var y = conv1d(tape.constant(x), tape.constant(Tensor({1, 1, 1}, {1.0})), tape.constant(Tensor({1}, 0.0)), 1,
                       Padding::same);
  EXPECT_EQ(y.value(), x);
}

TEST(Conv1D, MovingAverageWithZeroPaddedEnds) {
  Tape tape;
  const Tensor x({1, 1, 4}, {1.0, 2.0, 3.0, 4.0});
  const Var y = conv1d(tape.constant(x), tape.constant(Tensor({1, 1, 3}, 1.0 / 3.0)), tape.constant(Tensor({1}, 0.0)),
                       1, Padding::same);
  const double expected[] = {1.0, 2.0, 3.0, 7.0 / 3.0};
  for (Index i = 0; i < 4; ++i) EXPECT_NEAR(y.value()[i], expected[i], 1e-15);
}

TEST(Conv1D, MatchesReferenceForStridesAndPadding) {
  for (Index stride : {1, 2, 3}) {
    const Tensor x = gaussian_tensor({2, 3, 11}, 1), w = gaussian_tensor({4, 3, 3}, 2), b = gaussian_tensor({4}, 3);
    Tape tape;
    const Var y = conv1d(tape.constant(x), tape.constant(w), tape.constant(b), stride, Padding::same);
    const Tensor ref = reference_conv(x, w, b, stride);
    ASSERT_EQ(y.shape(), ref.shape());
    EXPECT_LT((y.value().data() - ref.data()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Conv1D, ValidPaddingLength) {
  EXPECT_EQ(conv_geometry(10, 3, 1, Padding::valid).out_length, 8);
  EXPECT_EQ(conv_geometry(10, 3, 2, Padding::valid).out_length, 4);
  EXPECT_THROW(conv_geometry(2, 3, 1, Padding::valid), ContractViolation);
}

TEST(Conv1D, Stride2On256GivesLength128) {
  RngStream rng(4);
  Conv1DLayer layer("c", 1, 16, 3, 2, Padding::same, Activation::relu, rng);
  Tape tape;
  const Var y = layer.forward(tape, tape.constant(Tensor({2, 1, 256}, 0.5)), Mode::infer);
  EXPECT_EQ(y.shape(), (Shape{2, 16, 128}));
}

TEST(Conv1D, ChannelMismatchIsContractViolation) {
  RngStream rng(5);
  Conv1DLayer layer("c", 2, 4, 3, 1, Padding::same, Activation::none, rng);
  Tape tape;
  EXPECT_THROW(layer.forward(tape, tape.constant(Tensor({1, 3, 8})), Mode::infer), ContractViolation);
}

TEST(Dense, IdentityWeights) {
  RngStream rng(6);
  DenseLayer layer("d", 3, 3, Activation::none, rng);
  layer.weight.value = Tensor::from_matrix(MatrixXr::Identity(3, 3));
  layer.bias.value = Tensor({3}, 0.0);
  const Tensor x({2, 3}, {1, 2, 3, -4, 5, -6});
  Tape tape;
  EXPECT_EQ(layer.forward(tape, tape.constant(x), Mode::infer).value(), x);
}

TEST(Dense, Activations) {
  Tape tape;
  EXPECT_EQ(activate(tape.constant(Tensor({2}, {-1.0, 2.0})), Activation::relu).value(), Tensor({2}, {0.0, 2.0}));
  EXPECT_EQ(activate(tape.constant(Tensor({3}, 0.0)), Activation::tanh).value(), Tensor({3}, 0.0));
}

TEST(Dense, DimensionMismatch) {
  RngStream rng(7);
  DenseLayer layer("d", 4, 2, Activation::none, rng);
  Tape tape;
  EXPECT_THROW(layer.forward(tape, tape.constant(Tensor({2, 3})), Mode::infer), ContractViolation);
}

TEST(BatchNorm, TrainModeZeroMeanUnitVariance) {
  BatchNorm1DLayer bn("bn", 3);
  const Tensor x = gaussian_tensor({4, 3, 5}, 8, 3.0);
  Tape tape;
  const Tensor y = bn.forward(tape, tape.constant(x), Mode::train).value();
  for (Index c = 0; c < 3; ++c) {
    double s = 0.0, s2 = 0.0;
    for (Index i = 0; i < 4; ++i)
      for (Index t = 0; t < 5; ++t) {
        const double v = y[(i * 3 + c) * 5 + t];
        s += v;
        s2 += v * v;
      }
    EXPECT_NEAR(s / 20.0, 0.0, 1e-9);
    EXPECT_NEAR(s2 / 20.0, 1.0, 1e-3);
  }
}

TEST(BatchNorm, RunningStatisticsFollowEma) {
  BatchNorm1DLayer bn("bn", 1);
  const Tensor x({2, 1, 2}, {1.0, 2.0, 3.0, 4.0});
  Tape tape;
  bn.forward(tape, tape.constant(x), Mode::train);
  EXPECT_NEAR(bn.running_mean[0], 0.01 * 2.5, 1e-15);
  EXPECT_NEAR(bn.running_var[0], 0.99 + 0.01 * 1.25, 1e-15);
}

TEST(BatchNorm, InferIdentityStatistics) {
  BatchNorm1DLayer bn("bn", 2);
  const Tensor x = gaussian_tensor({3, 2, 4}, 9);
  Tape tape;
  const Tensor y = bn.forward(tape, tape.constant(x), Mode::infer).value();
  EXPECT_LT((y.data() - x.data() / std::sqrt(1.0 + 1e-5)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((y.data() - x.data()).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(BatchNorm, ConstantChannelGivesShift) {
  BatchNorm1DLayer bn("bn", 2);
  bn.shift.value = Tensor({2}, {0.25, -1.0});
  Tape tape;
  const Tensor y = bn.forward(tape, tape.constant(Tensor({3, 2, 4}, 7.0)), Mode::train).value();
  for (Index i = 0; i < 3; ++i)
    for (Index c = 0; c < 2; ++c)
      for (Index t = 0; t < 4; ++t) EXPECT_DOUBLE_EQ(y[(i * 2 + c) * 4 + t], bn.shift.value[c]);
}

TEST(BatchNorm, BatchOfOneRejectedInTraining) {
  BatchNorm1DLayer bn("bn", 2);
  Tape tape;
  EXPECT_THROW(bn.forward(tape, tape.constant(Tensor({1, 2, 4})), Mode::train), ContractViolation);
}

TEST(BatchNorm, CalibrateAveragesBatchStatistics) {
  BatchNorm1DLayer bn("bn", 1);
  bn.running_mean[0] = 100.0;
  reset_calibration({&bn});
  Tape tape;
  bn.forward(tape, tape.constant(Tensor({2, 1, 1}, {0.0, 2.0})), Mode::calibrate);
  bn.forward(tape, tape.constant(Tensor({2, 1, 1}, {4.0, 6.0})), Mode::calibrate);
  EXPECT_DOUBLE_EQ(bn.running_mean[0], 3.0);
  EXPECT_DOUBLE_EQ(bn.running_var[0], 1.0);
  EXPECT_EQ(bn.calibration_count, 4);
}

TEST(MaxPool, Definition) {
  Tape tape;
  const Var y = maxpool1d(tape.constant(Tensor({1, 1, 4}, {1, 3, 2, 5})), 2);
  EXPECT_EQ(y.value(), Tensor({1, 1, 2}, {3, 5}));
}

TEST(MaxPool, OddLengthKeepsTrailingSingleton) {
  Tape tape;
  const Tensor x = gaussian_tensor({1, 2, 15}, 10);
  const Var y = maxpool1d(tape.constant(x), 2);
  EXPECT_EQ(y.dim(2), 8);
  EXPECT_EQ(y.value()[7], x[14]);
}

TEST(MaxPool, TiesRouteToFirstIndex) {
  Parameter p("p", Tensor({1, 1, 5}, 2.0));
  Tape tape;
  tape.backward(sum(maxpool1d(tape.param(p), 2)));
  EXPECT_EQ(p.grad, Tensor({1, 1, 5}, {1, 0, 1, 0, 1}));
}

TEST(Dropout, RateZeroIsIdentity) {
  RngStream rng(11);
  Tape tape;
  const Tensor x = gaussian_tensor({4, 5}, 12);
  EXPECT_EQ(dropout(tape.constant(x), 0.0, Mode::train, rng).value(), x);
  EXPECT_EQ(dropout(tape.constant(x), 0.0, Mode::infer, rng).value(), x);
  EXPECT_EQ(dropout(tape.constant(x), 0.1, Mode::infer, rng).value(), x);
}

TEST(Dropout, KeptFractionAndScaling) {
  RngStream rng(13);
  Tape tape;
  const Tensor y = dropout(tape.constant(Tensor({1000000}, 1.0)), 0.05, Mode::train, rng).value();
  const double kept = static_cast<double>((y.data().array() != 0.0).count()) / 1e6;
  EXPECT_NEAR(kept, 0.95, 0.002);
  EXPECT_NEAR(y.data().maxCoeff(), 1.0 / 0.95, 1e-15);
}

TEST(Dropout, RateOneRejected) {
  RngStream rng(14);
  Tape tape;
  EXPECT_THROW(dropout(tape.constant(Tensor({2})), 1.0, Mode::train, rng), ContractViolation);
}

TEST(Spectral, DiagonalMatrixScaledToBound) {
  const Tensor w({2, 2}, {3.0, 0.0, 0.0, 1.0});
  RngStream rng(15);
  SpectralState s = SpectralState::random(2, 2, 1.0, 20, rng);
  const Tensor out = spectral_normalize(w, s);
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(out.matrix().cast<double>());
  EXPECT_NEAR(svd.singularValues()[0], 1.0, 1e-3);
  EXPECT_NEAR(s.u.norm(), 1.0, 1e-9);
  EXPECT_NEAR(s.v.norm(), 1.0, 1e-9);
}

TEST(Spectral, WithinBoundUnchanged) {
  const Tensor w({2, 2}, {0.5, 0.0, 0.0, 0.2});
  RngStream rng(16);
  SpectralState s = SpectralState::random(2, 2, 0.95, 5, rng);
  EXPECT_EQ(spectral_normalize(w, s), w);
  EXPECT_GE(s.last_sigma, 0.0);
}

TEST(Spectral, RankOneConvergesInOneStep) {
  VectorXr a(3), b(2);
  a << 1.0, 2.0, -2.0;
  b << 3.0, 4.0;
  const MatrixXr w = a * b.transpose();
  VectorXr u = VectorXr::Ones(3).normalized(), v = VectorXr::Ones(2).normalized();
  const double sigma = power_iteration(w, u, v, 1);
  EXPECT_NEAR(sigma, a.norm() * b.norm(), 1e-12);
}

TEST(Spectral, ZeroWeightReturnedUnscaled) {
  RngStream rng(17);
  SpectralState s = SpectralState::random(3, 4, 0.95, 3, rng);
  const Tensor w({3, 4}, 0.0);
  EXPECT_EQ(spectral_normalize(w, s), w);
  EXPECT_EQ(s.last_sigma, 0.0);
}

TEST(Spectral, ResultWithinBoundAfterManyRandomWeights) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Tensor w = gaussian_tensor({8, 2, 3}, 200 + seed, 2.0);
    RngStream rng(seed);
    SpectralState s = SpectralState::random(8, 6, 0.95, 30, rng);
    const Tensor out = spectral_normalize(w, s);
    EXPECT_LE(spectral_norm_estimate(out), 0.95 * 1.001);
  }
}

TEST(ResNetBlock, SixteenFiltersOn256) {
  RngStream rng(18);
  ResNetBlock block("b", 1, 16, 3, 2, 2, 0.05, rng);
  Tape tape;
  const Var y = block.forward(tape, tape.constant(gaussian_tensor({2, 1, 256}, 19)), Mode::infer, rng);
  EXPECT_EQ(y.shape(), (Shape{2, 16, 64}));
}

TEST(ResNetBlock, ZeroWeightsLeaveShiftTerm) {
  RngStream rng(20);
  ResNetBlock block("b", 1, 4, 3, 2, 2, 0.0, rng);
  block.conv.weight.value.data().setZero();
  block.conv.bias.value.data().setZero();
  block.skip.weight.value.data().setZero();
  block.skip.bias.value.data().setZero();
  block.norm.shift.value = Tensor({4}, {-1.0, 0.5, 0.0, 2.0});
  Tape tape;
  const Tensor y = block.forward(tape, tape.constant(gaussian_tensor({2, 1, 16}, 21)), Mode::train, rng).value();
  for (Index i = 0; i < 2; ++i)
    for (Index c = 0; c < 4; ++c)
      for (Index t = 0; t < 4; ++t) EXPECT_DOUBLE_EQ(y[(i * 4 + c) * 4 + t], std::max(0.0, block.norm.shift.value[c]));
}

TEST(ResNetBlock, InferIsDeterministic) {
  RngStream rng(22), r1(1), r2(2);
  ResNetBlock block("b", 2, 8, 3, 2, 2, 0.5, rng);
  const Tensor x = gaussian_tensor({3, 2, 32}, 23);
  Tape t1, t2;
  EXPECT_EQ(block.forward(t1, t1.constant(x), Mode::infer, r1).value(),
            block.forward(t2, t2.constant(x), Mode::infer, r2).value());
}

TEST(Encoder, SiamesePresetGives128Embedding) {
  RngStream rng(24);
  Encoder enc = build_encoder(ArchitectureSpec::siamese(), 1, 256, rng);
  EXPECT_EQ(enc.output_width(), 128);
  Tape tape;
  EXPECT_EQ(enc.forward(tape, tape.constant(gaussian_tensor({2, 1, 256}, 25)), Mode::infer, rng).shape(),
            (Shape{2, 128}));
  EXPECT_EQ(enc.spectral_weights().size(), 8u);
}

TEST(Encoder, SurrogatePresetGives256) {
  RngStream rng(26);
  Encoder enc = build_encoder(ArchitectureSpec::surrogate(), 5, 15, rng);
  EXPECT_EQ(enc.output_width(), 256);
  Tape tape;
  const Var y = enc.forward(tape, tape.constant(gaussian_tensor({3, 5, 15}, 27)), Mode::infer, rng);
  EXPECT_EQ(y.shape(), (Shape{3, 256}));
  EXPECT_LE(y.value().data().cwiseAbs().maxCoeff(), 1.0);  // tanh output
}

TEST(Encoder, EmptySpecRejected) {
  RngStream rng(28);
  EXPECT_THROW(build_encoder(ArchitectureSpec{}, 1, 256, rng), ContractViolation);
}

TEST(Encoder, TooShortInputExplains) {
  RngStream rng(29);
  try {
    build_encoder(ArchitectureSpec::siamese(), 1, 64, rng);
    FAIL() << "expected a construction error";
  } catch (const ContractViolation& e) {
    EXPECT_NE(std::string(e.what()).find("too short"), std::string::npos);
  }
}

TEST(Encoder, ShapePropagationIsTotalAboveMinimum) {
  for (Index len = 256; len <= 300; len += 7) {
    RngStream rng(static_cast<std::uint64_t>(len));
    Encoder enc = build_encoder(ArchitectureSpec::siamese(), 1, len, rng);
    Tape tape;
    EXPECT_NO_THROW(enc.forward(tape, tape.constant(Tensor({2, 1, len}, 0.1)), Mode::train, rng));
  }
}

TEST(Encoder, ExportImportRoundTrip) {
  RngStream rng(30);
  Encoder a = build_encoder(ArchitectureSpec::siamese(), 1, 256, rng);
  RngStream other(31);
  Encoder b = build_encoder(ArchitectureSpec::siamese(), 1, 256, other);
  TensorBundle bundle;
  a.export_to(bundle);
  b.import_from(bundle);
  const Tensor x = gaussian_tensor({2, 1, 256}, 32);
  Tape t1, t2;
  EXPECT_EQ(a.forward(t1, t1.constant(x), Mode::infer, rng).value(), b.forward(t2, t2.constant(x), Mode::infer, rng).value());
}

TEST(FeatureNormalizer, FirstBatchInitializesStatistics) {
  FeatureNormalizer norm("n", 4);
  const Tensor x = gaussian_tensor({50, 4}, 33, 3.0);
  Tape tape;
  const Tensor y = norm.forward(tape, tape.constant(x), Mode::train).value();
  EXPECT_NEAR(y.matrix().rowwise().squaredNorm().mean(), 1.0, 1e-4);
  EXPECT_LT(y.matrix().colwise().mean().cwiseAbs().maxCoeff(), 1e-12);
  Tape t2;
  EXPECT_EQ(norm.forward(t2, t2.constant(x), Mode::infer).value(), y);
}

TEST(FeatureNormalizer, PreservesDistanceRatios) {
  FeatureNormalizer norm("n", 3);
  const Tensor x = gaussian_tensor({20, 3}, 34);
  Tape tape;
  const auto y = norm.forward(tape, tape.constant(x), Mode::train).value().matrix();
  const auto xm = x.matrix();
  const double r1 = (y.row(0) - y.row(1)).norm() / (xm.row(0) - xm.row(1)).norm();
  const double r2 = (y.row(2) - y.row(5)).norm() / (xm.row(2) - xm.row(5)).norm();
  EXPECT_NEAR(r1, r2, 1e-12);
}

// Gradient checks in inference mode; a random projection keeps every output in the loss.
Var projected(Tape& tape, Var y, std::uint64_t seed) {
  const Index n = y.value().size();
  return sum(mul(reshape(y, {n}), tape.constant(gaussian_tensor({n}, seed))));
}

TEST(GradCheck, Conv1DBatchNormChain) {
  RngStream rng(40);
  Conv1DLayer conv("c", 2, 3, 3, 2, Padding::same, Activation::relu, rng);
  BatchNorm1DLayer bn("bn", 3);
  bn.running_mean = VectorXr::Constant(3, 0.1);
  bn.running_var = VectorXr::Constant(3, 0.7);
  bn.scale.value = gaussian_tensor({3}, 41);
  bn.shift.value = gaussian_tensor({3}, 42);
  std::vector<Parameter*> ps{&conv.weight, &conv.bias, &bn.scale, &bn.shift};
  const ScalarForward f = [&](Tape& t, const Tensor& x) {
    return projected(t, bn.forward(t, conv.forward(t, t.constant(x), Mode::infer), Mode::infer), 43);
  };
  const auto r = finite_diff_check(f, ps, gaussian_tensor({2, 2, 9}, 44), 1e-6, RngStream(1));
  EXPECT_TRUE(r.passed(1e-4)) << r.max_relative_error();
}

TEST(GradCheck, BatchNormTrainingStatistics) {
  Parameter scale("s", gaussian_tensor({3}, 45)), shift("b", gaussian_tensor({3}, 46));
  Parameter x("x", gaussian_tensor({4, 3, 5}, 47));
  std::vector<Parameter*> ps{&scale, &shift, &x};
  const ScalarForward f = [&](Tape& t, const Tensor&) {
    return projected(t, batchnorm_train(t.param(x), t.param(scale), t.param(shift), 1e-5, nullptr, nullptr), 48);
  };
  const auto r = finite_diff_check(f, ps, Tensor({1}), 1e-6, RngStream(2));
  EXPECT_TRUE(r.passed(1e-4)) << r.max_relative_error();
}

TEST(GradCheck, MaxPoolAndConvInput) {
  Parameter x("x", gaussian_tensor({2, 3, 11}, 49)), w("w", gaussian_tensor({2, 3, 3}, 50)),
      b("b", gaussian_tensor({2}, 51));
  std::vector<Parameter*> ps{&x, &w, &b};
  const ScalarForward f = [&](Tape& t, const Tensor&) {
    return projected(t, maxpool1d(conv1d(t.param(x), t.param(w), t.param(b), 1, Padding::same), 2), 52);
  };
  const auto r = finite_diff_check(f, ps, Tensor({1}), 1e-6, RngStream(3));
  EXPECT_TRUE(r.passed(1e-4)) << r.max_relative_error();
}

TEST(GradCheck, SpectralDense) {
  RngStream rng(53);
  DenseLayer dense("d", 6, 4, Activation::tanh, rng);
  dense.weight.value.data() *= 4.0;  // force the bound to bind
  dense.enable_spectral(0.95, 1, rng);
  Tape warm;
  for (int i = 0; i < 30; ++i) spectral_weight(warm, dense.weight, *dense.spectral, Mode::train);
  ASSERT_GT(dense.spectral->last_sigma, 0.95);
  std::vector<Parameter*> ps{&dense.weight, &dense.bias};
  const ScalarForward f = [&](Tape& t, const Tensor& x) {
    return projected(t, dense.forward(t, t.constant(x), Mode::infer), 54);
  };
  const auto r = finite_diff_check(f, ps, gaussian_tensor({3, 6}, 55), 1e-6, RngStream(4));
  EXPECT_TRUE(r.passed(1e-4)) << r.max_relative_error();
}

TEST(GradCheck, ResNetBlockInference) {
  RngStream rng(56);
  ResNetBlock block("b", 2, 4, 3, 2, 2, 0.05, rng);
  block.conv.enable_spectral(0.95, 1, rng);
  block.skip.enable_spectral(0.95, 1, rng);
  block.norm.running_mean = gaussian_tensor({4}, 57).data();
  block.norm.running_var = VectorXr::Constant(4, 0.5);
  std::vector<Parameter*> ps;
  block.collect(ps);
  const ScalarForward f = [&](Tape& t, const Tensor& x) {
    RngStream unused(0);
    return projected(t, block.forward(t, t.constant(x), Mode::infer, unused), 58);
  };
  const auto r = finite_diff_check(f, ps, gaussian_tensor({2, 2, 16}, 59), 1e-6, RngStream(5));
  EXPECT_TRUE(r.passed(1e-4)) << r.max_relative_error();
}

TEST(GradCheck, FeatureNormalizerInference) {
  FeatureNormalizer norm("n", 3);
  Parameter x("x", gaussian_tensor({5, 3}, 60));
  std::vector<Parameter*> ps{&x};
  norm.running_mean = gaussian_tensor({3}, 61).data();
  norm.running_var = 0.8;
  const ScalarForward f = [&](Tape& t, const Tensor&) {
    return projected(t, norm.forward(t, t.param(x), Mode::infer), 62);
  };
  const auto r = finite_diff_check(f, ps, Tensor({1}), 1e-6, RngStream(6));
  EXPECT_TRUE(r.passed(1e-4)) << r.max_relative_error();
}

}  // namespace
}  // namespace dgpa
