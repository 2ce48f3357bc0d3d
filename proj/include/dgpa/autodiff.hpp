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

#include <functional>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dgpa/tensor.hpp"

namespace dgpa {

/// A trainable (or frozen) leaf tensor with its gradient and Adam moments.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Tensor value, bool trainable = true);

  std::string name;
  Tensor value;
  Tensor grad;
  Tensor first_moment;
  Tensor second_moment;
  bool trainable = true;

  void zero_grad() { grad.data().setZero(); }
};

using GradientMap = std::map<const Parameter*, Tensor>;

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid until the tape is cleared.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Index dim(Index axis) const { return value().dim(axis); }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Records a forward computation and replays it backwards.
///
/// Nodes are appended in evaluation order, so the node list is already
/// topologically sorted. Each node stores its forward value; backward
/// closures read saved values instead of recomputing them.
class Tape {
 public:
  /// Receives the upstream gradient and one accumulator per input
  /// (nullptr for inputs that do not require a gradient).
  using Backward = std::function<void(const Tensor& upstream, std::span<Tensor* const> input_grads)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Leaf node for a parameter. Repeated calls return the same node.
  Var param(Parameter& p);
  Var record(Tensor value, std::vector<Var> inputs, Backward backward);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Gradients of a scalar loss with respect to every parameter leaf on the
  /// tape. Also stores them into Parameter::grad. Clears the tape.
  GradientMap backward(Var loss);
  void clear();

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> inputs;
    Backward backward;
    Parameter* parameter = nullptr;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
};

// Elementwise and reduction primitives. All take and return Vars on the same tape.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
Var relu(Var a);
Var tanh(Var a);
Var cos(Var a);
Var abs(Var a);
Var square(Var a);
/// sqrt with zero gradient at 0.
Var sqrt(Var a);
Var reciprocal(Var a);
Var sum(Var a);
Var mean(Var a);
/// [rows, cols] -> [rows], summing each row.
Var sum_rows(Var a);
Var reshape(Var a, Shape shape);

/// a [n, k] x b [k, m].
Var matmul(Var a, Var b);
/// a [n, k] x b[m, k]^T.
Var matmul_nt(Var a, Var b);
/// x [n, c] + b [c] broadcast over rows.
Var add_row_vector(Var x, Var b);
/// x [n, c, ...] + b [c] broadcast over the leading and trailing axes.
Var add_channel_vector(Var x, Var b);
/// x [n, c, ...] * s [c] broadcast over the leading and trailing axes.
Var mul_channel_vector(Var x, Var s);

/// Rows [begin, begin + count) of axis 0.
Var slice_rows(Var a, Index begin, Index count);
Var concat_rows(Var a, Var b);
Var gather_rows(Var a, std::vector<Index> rows);

enum class Padding { same, valid };

struct ConvGeometry {
  Index out_length;
  Index pad_left;
};
ConvGeometry conv_geometry(Index length, Index kernel, Index stride, Padding padding);

/// Cross-correlation of x [batch, in, length] with w [filters, in, kernel] plus bias [filters].
Var conv1d(Var x, Var w, Var bias, Index stride, Padding padding);
/// Non-overlapping max pooling along the last axis; a short trailing window is kept.
Var maxpool1d(Var x, Index size);

/// Batch-statistics normalization over axes {0, 2} of x [batch, channels, length].
/// Writes the biased batch mean and variance per channel into the out-params.
Var batchnorm_train(Var x, Var scale, Var shift, double eps, VectorXr* batch_mean, VectorXr* batch_var);

/// weight * min(1, bound / sigma) with sigma = u^T W v; u and v are held fixed.
Var spectral_scale(Var weight, const VectorXr& u, const VectorXr& v, double bound);

}  // namespace dgpa
