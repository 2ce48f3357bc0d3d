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

// Scalar-generic dense kernels shared by the layers, the GP head and the
// evaluation oracle.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

namespace dgpa {

/// Runs `iterations` steps of power iteration from the warm-start pair (u, v)
/// and returns the estimate u^T W v. A zero matrix leaves (u, v) unchanged
/// and returns 0.
template <typename Derived, typename VecU, typename VecV>
typename Derived::Scalar power_iteration(const Eigen::MatrixBase<Derived>& w, Eigen::MatrixBase<VecU>& u,
                                         Eigen::MatrixBase<VecV>& v, int iterations) {
  using Scalar = typename Derived::Scalar;
  for (int it = 0; it < iterations; ++it) {
    auto next_v = (w.transpose() * u).eval();
    const Scalar nv = next_v.norm();
    if (nv == Scalar(0)) return Scalar(0);
    v = next_v / nv;
    auto next_u = (w * v).eval();
    const Scalar nu = next_u.norm();
    if (nu == Scalar(0)) return Scalar(0);
    u = next_u / nu;
  }
  return u.dot(w * v);
}

/// exp(-||a_i - b_j||^2 / (2 l^2)) for rows a_i of `a` and b_j of `b`.
template <typename DerivedA, typename DerivedB>
Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, Eigen::Dynamic> rbf_kernel(
    const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b,
    typename DerivedA::Scalar length_scale) {
  using Scalar = typename DerivedA::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const auto an = a.rowwise().squaredNorm().eval();
  const auto bn = b.rowwise().squaredNorm().eval();
  Matrix d2 = (-2 * a * b.transpose()).eval();
  d2.colwise() += an;
  d2.rowwise() += bn.transpose();
  return (d2.array().max(Scalar(0)) * (Scalar(-0.5) / (length_scale * length_scale))).exp().matrix();
}

/// sqrt(2/D) cos(h W^T + b) row-wise, for projection W [D, m] and phases b [D].
template <typename DerivedH, typename DerivedW, typename DerivedB>
Eigen::Matrix<typename DerivedH::Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> random_fourier_features(
    const Eigen::MatrixBase<DerivedH>& h, const Eigen::MatrixBase<DerivedW>& projection,
    const Eigen::MatrixBase<DerivedB>& phases) {
  using Scalar = typename DerivedH::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Matrix z = h * projection.transpose();
  z.rowwise() += phases.transpose();
  return (std::sqrt(Scalar(2) / static_cast<Scalar>(projection.rows())) * z.array().cos()).matrix();
}

/// Average ranks (ties share the mean rank), 1-based.
template <typename Derived>
Eigen::Matrix<double, Eigen::Dynamic, 1> average_ranks(const Eigen::MatrixBase<Derived>& x) {
  const Eigen::Index n = x.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) { return x(i) < x(j); });
  Eigen::Matrix<double, Eigen::Dynamic, 1> ranks(n);
  for (Eigen::Index i = 0; i < n;) {
    Eigen::Index j = i;
    while (j + 1 < n && x(order[static_cast<std::size_t>(j + 1)]) == x(order[static_cast<std::size_t>(i)])) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (Eigen::Index k = i; k <= j; ++k) ranks(order[static_cast<std::size_t>(k)]) = r;
    i = j + 1;
  }
  return ranks;
}

/// Spearman rank correlation of two equal-length vectors.
template <typename DerivedA, typename DerivedB>
double spearman(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  const auto ra = average_ranks(a), rb = average_ranks(b);
  const auto ca = (ra.array() - ra.mean()).matrix().eval();
  const auto cb = (rb.array() - rb.mean()).matrix().eval();
  const double denom = ca.norm() * cb.norm();
  return denom > 0 ? ca.dot(cb) / denom : 0.0;
}

}  // namespace dgpa
