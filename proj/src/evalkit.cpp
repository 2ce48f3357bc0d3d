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

#include "dgpa/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Cholesky>
#include "json.hpp"

#include "dgpa/linalg.hpp"

namespace dgpa {

RocCurve roc_curve(const std::vector<double>& scores, const std::vector<int>& labels) {
  require(scores.size() == labels.size(), "roc_curve: scores and labels differ in length");
  double positives = 0, negatives = 0;
  for (int y : labels) {
    require(y == 0 || y == 1, "roc_curve: labels must be 0 or 1");
    (y ? positives : negatives) += 1;
  }
  require(positives > 0 && negatives > 0, "roc_curve: both labels must be present");
  for (double s : scores) require(!std::isnan(s), "roc_curve: NaN score");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve c;
  c.thresholds.push_back(std::numeric_limits<double>::infinity());
  c.fpr.push_back(0.0);
  c.tpr.push_back(0.0);
  double tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    // Equal scores form one threshold step.
    for (; i < order.size() && scores[order[i]] == s; ++i) (labels[order[i]] ? tp : fp) += 1;
    c.thresholds.push_back(s);
    c.fpr.push_back(fp / negatives);
    c.tpr.push_back(tp / positives);
  }
  for (std::size_t i = 1; i < c.fpr.size(); ++i)
    c.auc += (c.fpr[i] - c.fpr[i - 1]) * 0.5 * (c.tpr[i] + c.tpr[i - 1]);
  return c;
}

std::vector<double> uniform_grid(std::size_t points) {
  require(points >= 2, "uniform_grid: need at least two points");
  std::vector<double> g(points);
  for (std::size_t i = 0; i < points; ++i) g[i] = static_cast<double>(i) / static_cast<double>(points - 1);
  return g;
}

std::vector<double> interpolate_tpr(const RocCurve& curve, const std::vector<double>& grid) {
  // Collapse to (fpr, lowest tpr, highest tpr) per distinct fpr.
  struct Step {
    double fpr, tpr_first, tpr_last;
  };
  std::vector<Step> steps;
  for (std::size_t i = 0; i < curve.fpr.size(); ++i) {
    if (!steps.empty() && steps.back().fpr == curve.fpr[i])
      steps.back().tpr_last = curve.tpr[i];
    else
      steps.push_back({curve.fpr[i], curve.tpr[i], curve.tpr[i]});
  }
  std::vector<double> out(grid.size());
  std::size_t k = 0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double x = grid[g];
    while (k + 1 < steps.size() && steps[k + 1].fpr <= x) ++k;
    if (steps[k].fpr == x || k + 1 == steps.size()) {
      out[g] = steps[k].tpr_last;
      continue;
    }
    const Step& a = steps[k];
    const Step& b = steps[k + 1];
    const double w = (x - a.fpr) / (b.fpr - a.fpr);
    out[g] = a.tpr_last + w * (b.tpr_first - a.tpr_last);
  }
  return out;
}

double percentile(std::vector<double> values, double q) {
  require(!values.empty(), "percentile: empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double SmearBand::mean_width() const {
  double total = 0.0;
  for (std::size_t i = 0; i < tpr_low.size(); ++i) total += tpr_high[i] - tpr_low[i];
  return tpr_low.empty() ? 0.0 : total / static_cast<double>(tpr_low.size());
}

SmearBand roc_with_smearing(const std::vector<double>& means, const std::vector<double>& stds,
                            const std::vector<int>& labels, int trials, RngStream rng, std::size_t grid_points) {
  require(means.size() == stds.size() && means.size() == labels.size(), "roc_with_smearing: length mismatch");
  require(trials >= 1, "roc_with_smearing: trials must be >= 1");
  for (double s : stds) require(s >= 0.0, "roc_with_smearing: standard deviations must be nonnegative");

  SmearBand band;
  band.fpr_grid = uniform_grid(grid_points);
  band.trials = trials;
  std::vector<std::vector<double>> tpr(static_cast<std::size_t>(trials));
  std::vector<double> sample(means.size());
  for (int t = 0; t < trials; ++t) {
    // One child stream per trial, so trials are order independent.
    RngStream trial_rng = rng.split(static_cast<std::uint64_t>(t));
    for (std::size_t i = 0; i < means.size(); ++i) sample[i] = means[i] + stds[i] * trial_rng.gaussian();
    tpr[static_cast<std::size_t>(t)] = interpolate_tpr(roc_curve(sample, labels), band.fpr_grid);
  }
  band.tpr_low.resize(grid_points);
  band.tpr_high.resize(grid_points);
  std::vector<double> column(static_cast<std::size_t>(trials));
  for (std::size_t g = 0; g < grid_points; ++g) {
    for (int t = 0; t < trials; ++t) column[static_cast<std::size_t>(t)] = tpr[static_cast<std::size_t>(t)][g];
    band.tpr_low[g] = percentile(column, 5.0);
    band.tpr_high[g] = percentile(column, 95.0);
  }
  return band;
}

double uncertainty_ratio(const std::vector<double>& stds, const std::vector<bool>& flags) {
  require(stds.size() == flags.size(), "uncertainty_ratio: length mismatch");
  double on = 0, off = 0;
  std::size_t n_on = 0, n_off = 0;
  for (std::size_t i = 0; i < stds.size(); ++i) {
    if (flags[i]) {
      on += stds[i];
      ++n_on;
    } else {
      off += stds[i];
      ++n_off;
    }
  }
  require(n_on > 0 && n_off > 0, "uncertainty_ratio: both flag values must be present");
  return (on / static_cast<double>(n_on)) / (off / static_cast<double>(n_off));
}

GPPosterior exact_gp_oracle(const VectorXr& train_x, const VectorXr& train_y, const VectorXr& queries,
                            double length_scale, double noise_var) {
  require(train_x.size() == train_y.size(), "exact_gp_oracle: train_x and train_y differ in length");
  require(train_x.size() <= 200, "exact_gp_oracle: at most 200 training points");
  require(noise_var > 0.0 && length_scale > 0.0, "exact_gp_oracle: noise variance and length-scale must be positive");
  GPPosterior out;
  if (train_x.size() == 0) {
    out.mean = VectorXr::Zero(queries.size());
    out.variance = VectorXr::Ones(queries.size());
    return out;
  }
  Eigen::MatrixXd k = rbf_kernel(Eigen::MatrixXd(train_x), Eigen::MatrixXd(train_x), length_scale);
  k.diagonal().array() += noise_var;
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success)
    throw NumericalError("exact_gp_oracle: kernel matrix not positive definite; increase noise_var");
  const Eigen::MatrixXd k_star = rbf_kernel(Eigen::MatrixXd(train_x), Eigen::MatrixXd(queries), length_scale);
  out.mean = k_star.transpose() * llt.solve(train_y);
  const Eigen::MatrixXd v = llt.matrixL().solve(k_star);
  out.variance = (1.0 - v.colwise().squaredNorm().transpose().array()).max(0.0).matrix();
  return out;
}

namespace {

using nlohmann::json;

json roc_json(const RocCurve& c) {
  // JSON has no infinity; the leading +inf threshold is implied.
  std::vector<double> thresholds(c.thresholds.begin() + 1, c.thresholds.end());
  return json{{"thresholds", thresholds}, {"fpr", c.fpr}, {"tpr", c.tpr}, {"auc", c.auc}};
}

RocCurve roc_from(const json& j) {
  RocCurve c;
  c.thresholds.push_back(std::numeric_limits<double>::infinity());
  for (double t : j.at("thresholds").get<std::vector<double>>()) c.thresholds.push_back(t);
  c.fpr = j.at("fpr").get<std::vector<double>>();
  c.tpr = j.at("tpr").get<std::vector<double>>();
  c.auc = j.at("auc").get<double>();
  return c;
}

}  // namespace

std::string report_to_json(const EvalReport& r) {
  json j;
  if (r.roc) j["roc"] = roc_json(*r.roc);
  if (r.band)
    j["band"] = json{{"fpr_grid", r.band->fpr_grid},
                     {"tpr_low", r.band->tpr_low},
                     {"tpr_high", r.band->tpr_high},
                     {"trials", r.band->trials}};
  json u = json::object();
  if (r.uncertainty_ratio) u["ratio"] = *r.uncertainty_ratio;
  if (!r.class_uncertainty.empty()) u["class_mean_std"] = r.class_uncertainty;
  if (!u.empty()) j["uncertainty"] = u;
  j["config"] = r.config;
  j["seed"] = r.seed;
  return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("report JSON: ") + e.what(), 0);
  }
  EvalReport r;
  try {
    if (j.contains("roc")) r.roc = roc_from(j.at("roc"));
    if (j.contains("band")) {
      const json& b = j.at("band");
      r.band = SmearBand{b.at("fpr_grid").get<std::vector<double>>(), b.at("tpr_low").get<std::vector<double>>(),
                         b.at("tpr_high").get<std::vector<double>>(), b.at("trials").get<int>()};
    }
    if (j.contains("uncertainty")) {
      const json& u = j.at("uncertainty");
      if (u.contains("ratio")) r.uncertainty_ratio = u.at("ratio").get<double>();
      if (u.contains("class_mean_std")) r.class_uncertainty = u.at("class_mean_std").get<std::map<std::string, double>>();
    }
    r.config = j.at("config").get<std::map<std::string, std::string>>();
    r.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("report JSON schema: ") + e.what(), 0);
  }
  return r;
}

}  // namespace dgpa
