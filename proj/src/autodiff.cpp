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

#include "dgpa/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dgpa {

Parameter::Parameter(std::string name_, Tensor value_, bool trainable_)
    : name(std::move(name_)),
      value(std::move(value_)),
      grad(Tensor::zeros_like(value)),
      first_moment(Tensor::zeros_like(value)),
      second_moment(Tensor::zeros_like(value)),
      trainable(trainable_) {}

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false});
  return {this, nodes_.size() - 1};
}

Var Tape::param(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return {this, it->second};
  nodes_.push_back(Node{p.value, {}, {}, &p, true});
  param_nodes_.emplace(&p, nodes_.size() - 1);
  return {this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::vector<Var> inputs, Backward backward) {
  Node node;
  node.value = std::move(value);
  node.backward = std::move(backward);
  node.inputs.reserve(inputs.size());
  for (const Var& in : inputs) {
    if (&in.tape() != this) throw std::logic_error("operand recorded on a different tape");
    node.inputs.push_back(in.id());
    node.requires_grad = node.requires_grad || nodes_[in.id()].requires_grad;
  }
  nodes_.push_back(std::move(node));
  return {this, nodes_.size() - 1};
}

void Tape::clear() {
  nodes_.clear();
  param_nodes_.clear();
}

GradientMap Tape::backward(Var loss) {
  require(&loss.tape() == this, "loss belongs to a different tape");
  require(loss.value().size() == 1,
          "backward requires a scalar loss, got shape " + shape_string(loss.shape()));

  std::vector<Tensor> grads(nodes_.size());
  grads[loss.id()] = Tensor(loss.shape(), 1.0);

  std::vector<Tensor*> input_grads;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!node.requires_grad || !node.backward || grads[id].size() == 0) continue;
    input_grads.clear();
    for (std::size_t in : node.inputs) {
      if (in >= id) throw std::logic_error("tape cycle: node input does not precede node");
      if (!nodes_[in].requires_grad) {
        input_grads.push_back(nullptr);
        continue;
      }
      if (grads[in].size() == 0) grads[in] = Tensor::zeros_like(nodes_[in].value);
      input_grads.push_back(&grads[in]);
    }
    node.backward(grads[id], input_grads);
    if (!grads[id].all_finite()) throw NumericalError("non-finite gradient in backward pass");
  }

  GradientMap result;
  for (const auto& [param, id] : param_nodes_) {
    Tensor g = grads[id].size() ? std::move(grads[id]) : Tensor::zeros_like(param->value);
    const_cast<Parameter*>(param)->grad = g;
    result.emplace(param, std::move(g));
  }
  clear();
  return result;
}

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                                      " vs " + shape_string(b.shape()));
}

}  // namespace

// Unary ops capture the forward input; saved values are copied into the closure.
#define DGPA_UNARY(name, fwd, bwd)                                                 \
  Var name(Var a) {                                                                \
    const VectorXr x = a.value().data();                                           \
    Tensor out(a.shape(), VectorXr(x.unaryExpr([](double v) { return fwd; })));   \
    VectorXr y = out.data();                                                       \
    return a.tape().record(std::move(out), {a},                                    \
                           [x, y](const Tensor& g, std::span<Tensor* const> ig) { \
                             if (!ig[0]) return;                                   \
                             auto& dst = ig[0]->data();                            \
                             for (Index i = 0; i < x.size(); ++i) {                \
                               const double v = x[i];                              \
                               const double out = y[i];                            \
                               (void)out;                                          \
                               (void)v;                                            \
                               dst[i] += g[i] * (bwd);                             \
                             }                                                     \
                           });                                                     \
  }

DGPA_UNARY(relu, v > 0.0 ? v : 0.0, v > 0.0 ? 1.0 : 0.0)
DGPA_UNARY(tanh, std::tanh(v), 1.0 - out * out)
DGPA_UNARY(cos, std::cos(v), -std::sin(v))
DGPA_UNARY(abs, std::abs(v), v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0))
DGPA_UNARY(square, v* v, 2.0 * v)
DGPA_UNARY(sqrt, std::sqrt(v), out > 0.0 ? 0.5 / out : 0.0)
DGPA_UNARY(reciprocal, 1.0 / v, -out * out)

#undef DGPA_UNARY

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape(), VectorXr(a.value().data() + b.value().data()));
  return a.tape().record(std::move(out), {a, b}, [](const Tensor& g, std::span<Tensor* const> ig) {
    if (ig[0]) ig[0]->data() += g.data();
    if (ig[1]) ig[1]->data() += g.data();
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  Tensor out(a.shape(), VectorXr(a.value().data() - b.value().data()));
  return a.tape().record(std::move(out), {a, b}, [](const Tensor& g, std::span<Tensor* const> ig) {
    if (ig[0]) ig[0]->data() += g.data();
    if (ig[1]) ig[1]->data() -= g.data();
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  const VectorXr x = a.value().data(), y = b.value().data();
  Tensor out(a.shape(), VectorXr(x.cwiseProduct(y)));
  return a.tape().record(std::move(out), {a, b},
                         [x, y](const Tensor& g, std::span<Tensor* const> ig) {
                           if (ig[0]) ig[0]->data() += g.data().cwiseProduct(y);
                           if (ig[1]) ig[1]->data() += g.data().cwiseProduct(x);
                         });
}

Var scale(Var a, double factor) {
  Tensor out(a.shape(), VectorXr(a.value().data() * factor));
  return a.tape().record(std::move(out), {a},
                         [factor](const Tensor& g, std::span<Tensor* const> ig) {
                           if (ig[0]) ig[0]->data() += factor * g.data();
                         });
}

Var add_scalar(Var a, double offset) {
  Tensor out(a.shape(), VectorXr(a.value().data().array() + offset));
  return a.tape().record(std::move(out), {a}, [](const Tensor& g, std::span<Tensor* const> ig) {
    if (ig[0]) ig[0]->data() += g.data();
  });
}

Var sum(Var a) {
  return a.tape().record(Tensor::scalar(a.value().data().sum()), {a},
                         [](const Tensor& g, std::span<Tensor* const> ig) {
                           if (ig[0]) ig[0]->data().array() += g[0];
                         });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var sum_rows(Var a) {
  require(a.value().rank() == 2, "sum_rows expects a rank-2 tensor");
  const Index rows = a.dim(0), cols = a.dim(1);
  Tensor out({rows}, VectorXr(a.value().matrix().rowwise().sum()));
  return a.tape().record(std::move(out), {a},
                         [rows, cols](const Tensor& g, std::span<Tensor* const> ig) {
                           if (!ig[0]) return;
                           ig[0]->matrix(rows, cols).colwise() += g.data();
                         });
}

Var reshape(Var a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return a.tape().record(std::move(out), {a}, [](const Tensor& g, std::span<Tensor* const> ig) {
    if (ig[0]) ig[0]->data() += g.data();
  });
}

Var matmul(Var a, Var b) {
  require(a.value().rank() == 2 && b.value().rank() == 2, "matmul expects rank-2 operands");
  require(a.dim(1) == b.dim(0), "matmul: inner dimensions differ " + shape_string(a.shape()) +
                                    " x " + shape_string(b.shape()));
  const MatrixXr x = a.value().matrix(), y = b.value().matrix();
  Tensor out = Tensor::from_matrix(x * y);
  return a.tape().record(std::move(out), {a, b},
                         [x, y](const Tensor& g, std::span<Tensor* const> ig) {
                           const auto gm = g.matrix();
                           if (ig[0]) ig[0]->matrix().noalias() += gm * y.transpose();
                           if (ig[1]) ig[1]->matrix().noalias() += x.transpose() * gm;
                         });
}

Var matmul_nt(Var a, Var b) {
  require(a.value().rank() == 2 && b.value().rank() == 2, "matmul_nt expects rank-2 operands");
  require(a.dim(1) == b.dim(1), "matmul_nt: inner dimensions differ " + shape_string(a.shape()) +
                                    " x " + shape_string(b.shape()) + "^T");
  const MatrixXr x = a.value().matrix(), y = b.value().matrix();
  Tensor out = Tensor::from_matrix(x * y.transpose());
  return a.tape().record(std::move(out), {a, b},
                         [x, y](const Tensor& g, std::span<Tensor* const> ig) {
                           const auto gm = g.matrix();
                           if (ig[0]) ig[0]->matrix().noalias() += gm * y;
                           if (ig[1]) ig[1]->matrix().noalias() += gm.transpose() * x;
                         });
}

Var add_row_vector(Var x, Var b) {
  require(x.value().rank() == 2 && b.value().rank() == 1 && b.dim(0) == x.dim(1),
          "add_row_vector: expected [n, c] + [c], got " + shape_string(x.shape()) + " + " +
              shape_string(b.shape()));
  Tensor out = x.value();
  out.matrix().rowwise() += b.value().data().transpose();
  return x.tape().record(std::move(out), {x, b}, [](const Tensor& g, std::span<Tensor* const> ig) {
    if (ig[0]) ig[0]->data() += g.data();
    if (ig[1]) ig[1]->data() += g.matrix().colwise().sum().transpose();
  });
}

namespace {

struct ChannelLayout {
  Index batch, channels, inner;
};

ChannelLayout channel_layout(const Var& x, const Var& c, const char* op) {
  require(x.value().rank() >= 2 && c.value().rank() == 1 && c.dim(0) == x.dim(1),
          std::string(op) + ": channel vector does not match " + shape_string(x.shape()));
  const Index batch = x.dim(0), channels = x.dim(1);
  return {batch, channels, x.value().size() / (batch * channels)};
}

}  // namespace

Var add_channel_vector(Var x, Var b) {
  const auto [batch, channels, inner] = channel_layout(x, b, "add_channel_vector");
  Tensor out = x.value();
  const VectorXr& bv = b.value().data();
  for (Index n = 0; n < batch; ++n) {
    auto block = out.matrix(batch * channels, inner).middleRows(n * channels, channels);
    block.colwise() += bv;
  }
  return x.tape().record(
      std::move(out), {x, b},
      [batch = batch, channels = channels, inner = inner](const Tensor& g, std::span<Tensor* const> ig) {
        if (ig[0]) ig[0]->data() += g.data();
        if (ig[1]) {
          const auto gm = g.matrix(batch * channels, inner);
          for (Index n = 0; n < batch; ++n)
            ig[1]->data() += gm.middleRows(n * channels, channels).rowwise().sum();
        }
      });
}

Var mul_channel_vector(Var x, Var s) {
  const auto [batch, channels, inner] = channel_layout(x, s, "mul_channel_vector");
  const Tensor xv = x.value();
  const VectorXr sv = s.value().data();
  Tensor out = xv;
  for (Index n = 0; n < batch; ++n) {
    auto block = out.matrix(batch * channels, inner).middleRows(n * channels, channels);
    block = sv.asDiagonal() * block;
  }
  return x.tape().record(
      std::move(out), {x, s},
      [xv, sv, batch = batch, channels = channels, inner = inner](const Tensor& g,
                                                                   std::span<Tensor* const> ig) {
        const auto gm = g.matrix(batch * channels, inner);
        const auto xm = xv.matrix(batch * channels, inner);
        for (Index n = 0; n < batch; ++n) {
          const auto gb = gm.middleRows(n * channels, channels);
          if (ig[0])
            ig[0]->matrix(batch * channels, inner).middleRows(n * channels, channels) +=
                sv.asDiagonal() * gb;
          if (ig[1])
            ig[1]->data() += gb.cwiseProduct(xm.middleRows(n * channels, channels)).rowwise().sum();
        }
      });
}

Var slice_rows(Var a, Index begin, Index count) {
  const Index rows = a.dim(0);
  require(begin >= 0 && count > 0 && begin + count <= rows, "slice_rows: range out of bounds");
  const Index stride = a.value().size() / rows;
  Shape shape = a.shape();
  shape[0] = count;
  Tensor out(shape, VectorXr(a.value().data().segment(begin * stride, count * stride)));
  return a.tape().record(std::move(out), {a},
                         [begin, count, stride](const Tensor& g, std::span<Tensor* const> ig) {
                           if (ig[0]) ig[0]->data().segment(begin * stride, count * stride) += g.data();
                         });
}

Var concat_rows(Var a, Var b) {
  Shape sa = a.shape(), sb = b.shape();
  require(sa.size() == sb.size() && std::equal(sa.begin() + 1, sa.end(), sb.begin() + 1),
          "concat_rows: trailing shapes differ");
  Shape shape = sa;
  shape[0] = sa[0] + sb[0];
  VectorXr data(a.value().size() + b.value().size());
  data << a.value().data(), b.value().data();
  const Index na = a.value().size(), nb = b.value().size();
  return a.tape().record(Tensor(shape, std::move(data)), {a, b},
                         [na, nb](const Tensor& g, std::span<Tensor* const> ig) {
                           if (ig[0]) ig[0]->data() += g.data().head(na);
                           if (ig[1]) ig[1]->data() += g.data().tail(nb);
                         });
}

Var gather_rows(Var a, std::vector<Index> rows) {
  require(!rows.empty(), "gather_rows: empty index list");
  const Index n = a.dim(0), stride = a.value().size() / n;
  for (Index r : rows) require(r >= 0 && r < n, "gather_rows: index out of range");
  Shape shape = a.shape();
  shape[0] = static_cast<Index>(rows.size());
  Tensor out(shape);
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.data().segment(static_cast<Index>(i) * stride, stride) = a.value().data().segment(rows[i] * stride, stride);
  return a.tape().record(std::move(out), {a},
                         [rows = std::move(rows), stride](const Tensor& g, std::span<Tensor* const> ig) {
                           if (!ig[0]) return;
                           for (std::size_t i = 0; i < rows.size(); ++i)
                             ig[0]->data().segment(rows[i] * stride, stride) +=
                                 g.data().segment(static_cast<Index>(i) * stride, stride);
                         });
}

ConvGeometry conv_geometry(Index length, Index kernel, Index stride, Padding padding) {
  require(kernel > 0 && stride > 0, "conv: kernel and stride must be positive");
  if (padding == Padding::valid) {
    require(length >= kernel, "conv: valid padding needs length >= kernel");
    return {(length - kernel) / stride + 1, 0};
  }
  const Index out = (length + stride - 1) / stride;
  const Index pad_total = std::max<Index>((out - 1) * stride + kernel - length, 0);
  return {out, pad_total / 2};
}

namespace {

// Unfold one sample [in, length] into columns [in * kernel, out_length].
void im2col(const double* x, Index in, Index length, Index kernel, Index stride, ConvGeometry geo,
            MatrixXr& col) {
  col.setZero(in * kernel, geo.out_length);
  for (Index c = 0; c < in; ++c)
    for (Index k = 0; k < kernel; ++k)
      for (Index t = 0; t < geo.out_length; ++t) {
        const Index pos = t * stride + k - geo.pad_left;
        if (pos >= 0 && pos < length) col(c * kernel + k, t) = x[c * length + pos];
      }
}

void col2im(const MatrixXr& col, Index in, Index length, Index kernel, Index stride, ConvGeometry geo,
            double* dx) {
  for (Index c = 0; c < in; ++c)
    for (Index k = 0; k < kernel; ++k)
      for (Index t = 0; t < geo.out_length; ++t) {
        const Index pos = t * stride + k - geo.pad_left;
        if (pos >= 0 && pos < length) dx[c * length + pos] += col(c * kernel + k, t);
      }
}

}  // namespace

Var conv1d(Var x, Var w, Var bias, Index stride, Padding padding) {
  require(x.value().rank() == 3, "conv1d: input must be [batch, channels, length], got " +
                                     shape_string(x.shape()));
  require(w.value().rank() == 3, "conv1d: weight must be [filters, channels, kernel]");
  const Index batch = x.dim(0), in = x.dim(1), length = x.dim(2);
  const Index filters = w.dim(0), kernel = w.dim(2);
  require(w.dim(1) == in, "conv1d: input has " + std::to_string(in) + " channels, layer expects " +
                              std::to_string(w.dim(1)));
  require(bias.value().rank() == 1 && bias.dim(0) == filters, "conv1d: bias must be [filters]");
  const ConvGeometry geo = conv_geometry(length, kernel, stride, padding);
  const Index lo = geo.out_length;

  const MatrixXr wm = w.value().matrix(filters, in * kernel);
  const VectorXr bv = bias.value().data();
  const Tensor xv = x.value();
  Tensor out({batch, filters, lo});
  MatrixXr col;
  for (Index n = 0; n < batch; ++n) {
    im2col(xv.data().data() + n * in * length, in, length, kernel, stride, geo, col);
    Eigen::Map<MatrixXr> yb(out.data().data() + n * filters * lo, filters, lo);
    yb.noalias() = wm * col;
    yb.colwise() += bv;
  }
  return x.tape().record(
      std::move(out), {x, w, bias},
      [=](const Tensor& g, std::span<Tensor* const> ig) {
        MatrixXr col, dcol;
        for (Index n = 0; n < batch; ++n) {
          Eigen::Map<const MatrixXr> gb(g.data().data() + n * filters * lo, filters, lo);
          if (ig[1]) {
            im2col(xv.data().data() + n * in * length, in, length, kernel, stride, geo, col);
            ig[1]->matrix(filters, in * kernel).noalias() += gb * col.transpose();
          }
          if (ig[2]) ig[2]->data() += gb.rowwise().sum();
          if (ig[0]) {
            dcol.noalias() = wm.transpose() * gb;
            col2im(dcol, in, length, kernel, stride, geo, ig[0]->data().data() + n * in * length);
          }
        }
      });
}

Var maxpool1d(Var x, Index size) {
  require(size > 0, "maxpool1d: size must be positive");
  require(x.value().rank() == 3, "maxpool1d: input must be [batch, channels, length]");
  const Index rows = x.dim(0) * x.dim(1), length = x.dim(2);
  const Index lo = (length + size - 1) / size;
  const auto xm = x.value().matrix(rows, length);
  Tensor out({x.dim(0), x.dim(1), lo});
  auto om = out.matrix(rows, lo);
  std::vector<Index> argmax(static_cast<std::size_t>(rows * lo));
  for (Index r = 0; r < rows; ++r)
    for (Index t = 0; t < lo; ++t) {
      const Index begin = t * size, end = std::min(begin + size, length);
      Index best = begin;
      for (Index i = begin + 1; i < end; ++i)
        if (xm(r, i) > xm(r, best)) best = i;  // strict: first index wins ties
      om(r, t) = xm(r, best);
      argmax[static_cast<std::size_t>(r * lo + t)] = best;
    }
  return x.tape().record(std::move(out), {x},
                         [argmax = std::move(argmax), rows, length, lo](const Tensor& g,
                                                                        std::span<Tensor* const> ig) {
                           if (!ig[0]) return;
                           auto dx = ig[0]->matrix(rows, length);
                           const auto gm = g.matrix(rows, lo);
                           for (Index r = 0; r < rows; ++r)
                             for (Index t = 0; t < lo; ++t)
                               dx(r, argmax[static_cast<std::size_t>(r * lo + t)]) += gm(r, t);
                         });
}

Var batchnorm_train(Var x, Var scale_v, Var shift_v, double eps, VectorXr* batch_mean,
                    VectorXr* batch_var) {
  require(x.value().rank() >= 2, "batchnorm: input must be [batch, channels, ...]");
  const Index batch = x.dim(0), channels = x.dim(1);
  const Index inner = x.value().size() / (batch * channels);
  const Index count = batch * inner;
  require(count >= 2, "batchnorm: training mode needs at least two values per channel");
  require(scale_v.dim(0) == channels && shift_v.dim(0) == channels,
          "batchnorm: scale/shift must be [channels]");

  const auto xm = x.value().matrix(batch * channels, inner);
  VectorXr mu = VectorXr::Zero(channels), var = VectorXr::Zero(channels);
  for (Index n = 0; n < batch; ++n) mu += xm.middleRows(n * channels, channels).rowwise().sum();
  mu /= static_cast<double>(count);
  for (Index n = 0; n < batch; ++n)
    var += (xm.middleRows(n * channels, channels).colwise() - mu).array().square().matrix().rowwise().sum();
  var /= static_cast<double>(count);
  const VectorXr inv_std = (var.array() + eps).rsqrt().matrix();

  Tensor xhat(x.shape());
  auto hm = xhat.matrix(batch * channels, inner);
  for (Index n = 0; n < batch; ++n)
    hm.middleRows(n * channels, channels) =
        inv_std.asDiagonal() * (xm.middleRows(n * channels, channels).colwise() - mu);

  const VectorXr gamma = scale_v.value().data(), beta = shift_v.value().data();
  Tensor out(x.shape());
  auto om = out.matrix(batch * channels, inner);
  for (Index n = 0; n < batch; ++n) {
    om.middleRows(n * channels, channels) = gamma.asDiagonal() * hm.middleRows(n * channels, channels);
    om.middleRows(n * channels, channels).colwise() += beta;
  }
  if (batch_mean) *batch_mean = mu;
  if (batch_var) *batch_var = var;

  return x.tape().record(
      std::move(out), {x, scale_v, shift_v},
      [=](const Tensor& g, std::span<Tensor* const> ig) {
        const auto gm = g.matrix(batch * channels, inner);
        const auto hmat = xhat.matrix(batch * channels, inner);
        VectorXr sum_g = VectorXr::Zero(channels), sum_gh = VectorXr::Zero(channels);
        for (Index n = 0; n < batch; ++n) {
          sum_g += gm.middleRows(n * channels, channels).rowwise().sum();
          sum_gh += gm.middleRows(n * channels, channels).cwiseProduct(hmat.middleRows(n * channels, channels))
                        .rowwise()
                        .sum();
        }
        if (ig[1]) ig[1]->data() += sum_gh;
        if (ig[2]) ig[2]->data() += sum_g;
        if (ig[0]) {
          const double m = static_cast<double>(count);
          auto dx = ig[0]->matrix(batch * channels, inner);
          const VectorXr coeff = gamma.cwiseProduct(inv_std) / m;
          for (Index n = 0; n < batch; ++n) {
            auto gb = gm.middleRows(n * channels, channels);
            auto hb = hmat.middleRows(n * channels, channels);
            MatrixXr term = (m * gb).colwise() - sum_g;
            term -= sum_gh.asDiagonal() * hb;
            dx.middleRows(n * channels, channels) += coeff.asDiagonal() * term;
          }
        }
      });
}

Var spectral_scale(Var weight, const VectorXr& u, const VectorXr& v, double bound) {
  const Index rows = weight.dim(0), cols = weight.value().size() / rows;
  require(u.size() == rows && v.size() == cols, "spectral_scale: singular vectors do not match weight");
  const auto wm = weight.value().matrix(rows, cols);
  const double sigma = u.dot(wm * v);
  const bool scaled = sigma > bound;
  const double factor = scaled ? bound / sigma : 1.0;
  Tensor out = weight.value();
  out.data() *= factor;
  const MatrixXr w = wm;
  return weight.tape().record(
      std::move(out), {weight},
      [=](const Tensor& g, std::span<Tensor* const> ig) {
        if (!ig[0]) return;
        auto gw = ig[0]->matrix(rows, cols);
        const auto gm = g.matrix(rows, cols);
        if (!scaled) {
          gw += gm;
          return;
        }
        // d/dW [c W / (u^T W v)] contracted with g.
        const double inner = gm.cwiseProduct(w).sum();
        gw += factor * gm - (factor / sigma) * inner * (u * v.transpose());
      });
}

}  // namespace dgpa
