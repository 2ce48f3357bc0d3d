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

#include "dgpa/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dgpa {

void adam_step(std::span<Parameter* const> params, const AdamConfig& config, long step) {
  require(step >= 1, "adam_step: step must be >= 1");
  require(config.lr > 0.0, "adam_step: learning rate must be positive");
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
  for (Parameter* p : params) {
    if (!p->trainable) continue;
    require(p->grad.shape() == p->value.shape(), "adam_step: gradient shape differs for " + p->name);
    auto g = p->grad.data().array();
    auto m = p->first_moment.data().array();
    auto v = p->second_moment.data().array();
    m = config.beta1 * m + (1.0 - config.beta1) * g;
    v = config.beta2 * v + (1.0 - config.beta2) * g.square();
    p->value.data().array() -= config.lr * (m / c1) / ((v / c2).sqrt() + config.eps);
  }
}

Tensor seeded_init(const Shape& shape, const InitScheme& scheme, RngStream& rng) {
  require(!shape.empty(), "seeded_init: shape must be nonempty");
  Tensor t(shape);
  std::visit(
      [&](const auto& s) {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, Gaussian>) {
          require(s.sigma > 0.0, "seeded_init: gaussian sigma must be positive");
          for (Index i = 0; i < t.size(); ++i) t[i] = s.sigma * rng.gaussian();
        } else if constexpr (std::is_same_v<S, Uniform>) {
          require(s.low < s.high, "seeded_init: uniform bounds require low < high");
          for (Index i = 0; i < t.size(); ++i) t[i] = rng.uniform(s.low, s.high);
        } else {
          const Index fan_in = shape.size() > 1 ? t.size() / shape.front() : shape.front();
          const double sigma = std::sqrt(2.0 / static_cast<double>(fan_in));
          for (Index i = 0; i < t.size(); ++i) t[i] = sigma * rng.gaussian();
        }
      },
      scheme);
  return t;
}

double GradCheckReport::max_relative_error() const {
  double worst = 0.0;
  for (const auto& e : entries) worst = std::max(worst, e.max_relative_error);
  return worst;
}

namespace {

double evaluate(const ScalarForward& forward, const Tensor& input) {
  Tape tape;
  const Var out = forward(tape, input);
  require(out.value().size() == 1, "finite_diff_check: forward must return a scalar");
  return out.value()[0];
}

}  // namespace

GradCheckReport finite_diff_check(const ScalarForward& forward, std::span<Parameter* const> params,
                                  const Tensor& probe_input, double step, RngStream rng,
                                  Index coordinates) {
  require(step > 0.0 && step <= 1e-2, "finite_diff_check: step must lie in (0, 1e-2]");
  const double base = evaluate(forward, probe_input);
  if (evaluate(forward, probe_input) != base)
    throw ContractViolation("finite_diff_check: forward is stochastic (repeated calls differ); "
                            "disable dropout and freeze batch statistics");

  Tape tape;
  for (Parameter* p : params) tape.param(*p);
  const GradientMap analytic = tape.backward(forward(tape, probe_input));

  GradCheckReport report;
  for (Parameter* p : params) {
    const Tensor& grad = analytic.at(p);
    std::vector<Index> coords(static_cast<std::size_t>(p->value.size()));
    std::iota(coords.begin(), coords.end(), Index{0});
    if (static_cast<Index>(coords.size()) > coordinates) {
      // Partial Fisher-Yates: the first `coordinates` entries are a uniform sample.
      for (Index i = 0; i < coordinates; ++i) {
        const auto j = i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(coords.size()) - static_cast<std::uint64_t>(i)));
        std::swap(coords[static_cast<std::size_t>(i)], coords[static_cast<std::size_t>(j)]);
      }
      coords.resize(static_cast<std::size_t>(coordinates));
    }
    GradCheckEntry entry{p->name, static_cast<Index>(coords.size()), 0.0};
    for (Index c : coords) {
      const double saved = p->value[c];
      p->value[c] = saved + step;
      const double up = evaluate(forward, probe_input);
      p->value[c] = saved - step;
      const double down = evaluate(forward, probe_input);
      p->value[c] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = grad[c];
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-12});
      entry.max_relative_error = std::max(entry.max_relative_error, err);
    }
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace dgpa

namespace dgpa {

std::vector<Index> shuffled_indices(Index n, RngStream& rng) {
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  for (Index i = n - 1; i > 0; --i)
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(i + 1)))]);
  return idx;
}

std::vector<std::vector<Index>> make_batches(const std::vector<Index>& order, Index batch_size) {
  require(batch_size > 0, "batch size must be positive");
  const Index n = static_cast<Index>(order.size());
  std::vector<std::vector<Index>> batches;
  if (n == 0) return batches;
  const Index count = (n + batch_size - 1) / batch_size;
  Index begin = 0;
  for (Index b = 0; b < count; ++b) {
    const Index end = (n * (b + 1)) / count;
    batches.emplace_back(order.begin() + begin, order.begin() + end);
    begin = end;
  }
  return batches;
}

}  // namespace dgpa
