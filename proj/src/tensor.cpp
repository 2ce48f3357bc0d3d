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

#include "dgpa/tensor.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace dgpa {

Index shape_size(const Shape& shape) {
  Index n = 1;
  for (Index d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

namespace {
void check_shape(const Shape& shape) {
  require(!shape.empty(), "tensor shape must be nonempty");
  for (Index d : shape) require(d > 0, "tensor dimensions must be positive: " + shape_string(shape));
}
}  // namespace

Tensor::Tensor(Shape shape) : Tensor(std::move(shape), 0.0) {}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_ = VectorXr::Constant(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, VectorXr data) : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  require(shape_size(shape_) == data_.size(), "data length does not match shape " + shape_string(shape_));
}

Tensor::Tensor(Shape shape, std::initializer_list<double> values) : shape_(std::move(shape)) {
  check_shape(shape_);
  require(shape_size(shape_) == static_cast<Index>(values.size()),
          "initializer length does not match shape " + shape_string(shape_));
  data_.resize(static_cast<Index>(values.size()));
  Index i = 0;
  for (double v : values) data_[i++] = v;
}

Tensor Tensor::from_matrix(const MatrixXr& m) {
  Tensor t({m.rows(), m.cols()});
  t.matrix() = m;
  return t;
}

Tensor Tensor::from_vector(const VectorXr& v) { return Tensor({v.size()}, v); }

Index Tensor::dim(Index axis) const {
  require(axis >= 0 && axis < rank(), "axis out of range");
  return shape_[static_cast<std::size_t>(axis)];
}

double Tensor::item() const {
  require(size() == 1, "item() requires a single-element tensor, got " + shape_string(shape_));
  return data_[0];
}

Eigen::Map<MatrixXr> Tensor::matrix() { return matrix(shape_.front(), size() / shape_.front()); }
Eigen::Map<const MatrixXr> Tensor::matrix() const {
  return matrix(shape_.front(), size() / shape_.front());
}
Eigen::Map<MatrixXr> Tensor::matrix(Index rows, Index cols) {
  require(rows * cols == size(), "matrix view does not cover tensor");
  return {data_.data(), rows, cols};
}
Eigen::Map<const MatrixXr> Tensor::matrix(Index rows, Index cols) const {
  require(rows * cols == size(), "matrix view does not cover tensor");
  return {data_.data(), rows, cols};
}

Tensor Tensor::reshaped(Shape shape) const {
  require(shape_size(shape) == size(),
          "cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  return Tensor(std::move(shape), data_);
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t RngStream::next_u64() {
  const std::uint64_t key = mix64(seed_);
  return mix64(key ^ mix64(counter_++ * 0xd1b54a32d192ed03ULL + key));
}

double RngStream::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double RngStream::gaussian() {
  // Box-Muller; 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t RngStream::below(std::uint64_t n) {
  require(n > 0, "below(n) requires n > 0");
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

RngStream RngStream::split(std::uint64_t tag) const {
  return RngStream(mix64(mix64(seed_) ^ mix64(tag + 0x632be59bd9b4e019ULL)), 0);
}

}  // namespace dgpa
