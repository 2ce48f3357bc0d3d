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

#include "dgpa/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace dgpa {

namespace {

constexpr double kPulseNoise = 0.02;
constexpr Index kRiseBegin = 16, kRiseEnd = 48, kFallBegin = 200, kFallEnd = 232;

constexpr double kSeriesNoise = 0.004;

}  // namespace

std::string to_string(PulseClass c) {
  switch (c) {
    case PulseClass::normal:
      return "normal";
    case PulseClass::anomaly_a:
      return "anomaly_a";
    case PulseClass::anomaly_b:
      return "anomaly_b";
  }
  return "normal";
}

PulseClass pulse_class_from_string(const std::string& s) {
  if (s == "normal") return PulseClass::normal;
  if (s == "anomaly_a") return PulseClass::anomaly_a;
  if (s == "anomaly_b") return PulseClass::anomaly_b;
  throw ContractViolation("unknown pulse class '" + s + "'");
}

VectorXr base_pulse() {
  VectorXr p = VectorXr::Zero(kPulseLength);
  for (Index t = 0; t < kPulseLength; ++t) {
    if (t >= kRiseBegin && t < kRiseEnd)
      p[t] = static_cast<double>(t - kRiseBegin) / static_cast<double>(kRiseEnd - kRiseBegin);
    else if (t >= kRiseEnd && t < kFallBegin)
      p[t] = 1.0;
    else if (t >= kFallBegin && t < kFallEnd)
      p[t] = 1.0 - static_cast<double>(t - kFallBegin) / static_cast<double>(kFallEnd - kFallBegin);
  }
  return p;
}

std::vector<PulseRecord> gen_pulses(const PulseCounts& counts, RngStream rng) {
  require(counts.normal >= 0 && counts.anomaly_a >= 0 && counts.anomaly_b >= 0, "gen_pulses: counts must be >= 0");
  const VectorXr base = base_pulse();
  std::vector<PulseRecord> out;
  out.reserve(static_cast<std::size_t>(counts.normal + counts.anomaly_a + counts.anomaly_b));
  std::int64_t id = 0;
  auto emit = [&](PulseClass cls, Index n) {
    for (Index k = 0; k < n; ++k, ++id) {
      RngStream r = rng.split(static_cast<std::uint64_t>(id));
      VectorXr trace = base;
      if (cls == PulseClass::anomaly_a) {
        const Index onset = 80 + static_cast<Index>(r.below(71));
        const double depth = r.uniform(0.2, 0.4);
        constexpr Index ramp = 24;
        for (Index t = onset; t < kPulseLength; ++t) {
          const double frac = std::min(1.0, static_cast<double>(t - onset) / ramp);
          trace[t] *= 1.0 - depth * frac;
        }
      } else if (cls == PulseClass::anomaly_b) {
        const double period = r.uniform(8.0, 16.0);
        const double amplitude = r.uniform(0.2, 0.4);
        const double phase = r.uniform(0.0, 2.0 * std::numbers::pi);
        for (Index t = 0; t < kPulseLength; ++t)
          trace[t] += base[t] * amplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / period + phase);
      }
      for (Index t = 0; t < kPulseLength; ++t) trace[t] = std::clamp(trace[t] + kPulseNoise * r.gaussian(), -2.0, 2.0);
      out.push_back(PulseRecord{Tensor({kPulseLength}, std::move(trace)), cls, id});
    }
  };
  emit(PulseClass::normal, counts.normal);
  emit(PulseClass::anomaly_a, counts.anomaly_a);
  emit(PulseClass::anomaly_b, counts.anomaly_b);
  return out;
}

BoosterSeries gen_booster_series(Index length, const std::vector<std::pair<Index, Index>>& ood_segments,
                                 RngStream rng) {
  require(length > 0, "gen_booster_series: length must be positive");
  auto segments = ood_segments;
  std::sort(segments.begin(), segments.end());
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto [s, e] = segments[i];
    require(s >= 0 && s < e && e <= length, "gen_booster_series: segment outside [0, T)");
    if (i > 0) require(segments[i - 1].second <= s, "gen_booster_series: OOD segments overlap");
  }

  RngStream phase_rng = rng.split(1), noise_rng = rng.split(2), ood_rng = rng.split(3);
  const double phi1 = phase_rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double phi2 = phase_rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double two_pi = 2.0 * std::numbers::pi;

  BoosterSeries s;
  s.channels = Tensor({kBoosterChannels, length});
  s.gate = VectorXr(length);
  s.ood_mask.assign(static_cast<std::size_t>(length), false);
  auto ch = s.channels.matrix();
  double walk = 0.0;
  for (Index t = 0; t < length; ++t) {
    const double tt = static_cast<double>(t);
    const double z1 = std::sin(two_pi * tt / 160.0 + phi1);
    const double z2 = std::sin(two_pi * tt / 97.0 + phi2);
    walk = 0.98 * walk + 0.01 * noise_rng.gaussian();
    ch(0, t) = 1.00 + 0.15 * z1 + 0.5 * walk;
    ch(1, t) = 1.50 + 0.20 * z1 + 0.10 * z2;
    ch(2, t) = 0.80 + 0.12 * z2;
    ch(3, t) = 1.20 + 0.08 * z1 * z2 + 0.3 * walk;
    ch(4, t) = 0.90 - 0.10 * z1 + 0.05 * z2;
    for (Index c = 0; c < kBoosterChannels; ++c) ch(c, t) += kSeriesNoise * noise_rng.gaussian();
    s.gate[t] = 0.955 + 0.025 * z2 + 0.002 * noise_rng.uniform(-1.0, 1.0);
  }
  for (const auto& [start, end] : segments) {
    const double period = ood_rng.uniform(4.0, 8.0);
    constexpr double amplitude = 2.0;
    for (Index t = start; t < end; ++t) {
      ch(kBoosterOutputChannel, t) += amplitude * std::sin(two_pi * static_cast<double>(t - start) / period);
      s.gate[t] = 0.997 + 0.002 * ood_rng.uniform();
      s.ood_mask[static_cast<std::size_t>(t)] = true;
    }
  }
  return s;
}

std::vector<WindowedSample> make_windows(const BoosterSeries& series, Index output_channel) {
  const Index length = series.length();
  require(length >= kWindowSteps + 1, "make_windows: series needs at least 16 steps");
  require(output_channel >= 0 && output_channel < kBoosterChannels, "make_windows: output channel out of range");
  const auto ch = series.channels.matrix();
  std::vector<WindowedSample> out;
  out.reserve(static_cast<std::size_t>(length - kWindowSteps));
  for (Index k = 0; k + kWindowSteps < length; ++k) {
    WindowedSample w;
    w.inputs = Tensor::from_matrix(ch.middleCols(k, kWindowSteps));
    const Index target_step = k + kWindowSteps;
    w.target = ch(output_channel, target_step);
    w.gate_value = series.gate[target_step];
    w.ood_flag = series.ood_mask[static_cast<std::size_t>(target_step)];
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<WindowedSample> filter_windows(const std::vector<WindowedSample>& windows, double threshold) {
  std::vector<WindowedSample> out;
  std::copy_if(windows.begin(), windows.end(), std::back_inserter(out),
               [threshold](const WindowedSample& w) { return w.gate_value <= threshold; });
  return out;
}

namespace {

using IndexPair = std::pair<Index, Index>;

// Uniform sample of `want` distinct pairs from a population enumerated by `pair_at(k)`, k < total.
template <typename PairAt>
std::vector<IndexPair> sample_distinct(Index total, Index want, RngStream& rng, PairAt pair_at) {
  want = std::min(want, total);
  std::vector<IndexPair> out;
  if (want <= 0) return out;
  std::set<Index> chosen;
  if (want * 4 >= total) {
    std::vector<Index> all(static_cast<std::size_t>(total));
    for (Index k = 0; k < total; ++k) all[static_cast<std::size_t>(k)] = k;
    for (Index i = 0; i < want; ++i) {
      const Index j = i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(total - i)));
      std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(j)]);
      out.push_back(pair_at(all[static_cast<std::size_t>(i)]));
    }
    return out;
  }
  while (static_cast<Index>(out.size()) < want) {
    const Index k = static_cast<Index>(rng.below(static_cast<std::uint64_t>(total)));
    if (chosen.insert(k).second) out.push_back(pair_at(k));
  }
  return out;
}

PulsePair build_pair(const std::vector<PulseRecord>& pulses, Index a, Index b, int label) {
  const auto& pa = pulses[static_cast<std::size_t>(a)];
  const auto& pb = pulses[static_cast<std::size_t>(b)];
  return PulsePair{pa.trace.reshaped({1, kPulseLength}), pb.trace.reshaped({1, kPulseLength}), label, a, b,
                   pb.pulse_class};
}

std::vector<Index> indices_of(const std::vector<PulseRecord>& pulses, PulseClass cls) {
  std::vector<Index> idx;
  for (std::size_t i = 0; i < pulses.size(); ++i)
    if (pulses[i].pulse_class == cls) idx.push_back(static_cast<Index>(i));
  return idx;
}

}  // namespace

std::vector<PulsePair> make_pairs(const std::vector<PulseRecord>& pulses, Index pairs_per_label, bool unseen_excluded,
                                  RngStream rng) {
  require(pairs_per_label >= 0, "make_pairs: pairs_per_label must be >= 0");
  const std::vector<Index> normals = indices_of(pulses, PulseClass::normal);
  std::vector<Index> anomalies = indices_of(pulses, PulseClass::anomaly_a);
  if (!unseen_excluded) {
    const auto b = indices_of(pulses, PulseClass::anomaly_b);
    anomalies.insert(anomalies.end(), b.begin(), b.end());
    std::sort(anomalies.begin(), anomalies.end());
  }
  require(normals.size() >= 2, "make_pairs: need at least two normal pulses");
  require(!anomalies.empty(), "make_pairs: need at least one anomaly pulse of an allowed class");
  std::vector<PulsePair> out;
  if (pairs_per_label == 0) return out;

  const Index n = static_cast<Index>(normals.size()), a = static_cast<Index>(anomalies.size());
  RngStream same_rng = rng.split(0), cross_rng = rng.split(1);
  // Unordered normal pairs i < j, enumerated row by row.
  auto normal_pair = [&](Index k) {
    Index i = 0;
    while (k >= n - 1 - i) {
      k -= n - 1 - i;
      ++i;
    }
    return IndexPair{normals[static_cast<std::size_t>(i)], normals[static_cast<std::size_t>(i + 1 + k)]};
  };
  for (auto [i, j] : sample_distinct(n * (n - 1) / 2, pairs_per_label, same_rng, normal_pair))
    out.push_back(build_pair(pulses, i, j, 0));
  auto cross_pair = [&](Index k) {
    return IndexPair{normals[static_cast<std::size_t>(k / a)], anomalies[static_cast<std::size_t>(k % a)]};
  };
  for (auto [i, j] : sample_distinct(n * a, pairs_per_label, cross_rng, cross_pair))
    out.push_back(build_pair(pulses, i, j, 1));
  return out;
}

std::vector<PulsePair> make_pairs_with(const std::vector<PulseRecord>& pulses, PulseClass partner_class, Index limit,
                                       RngStream rng) {
  const std::vector<Index> normals = indices_of(pulses, PulseClass::normal);
  const std::vector<Index> partners = indices_of(pulses, partner_class);
  require(!normals.empty() && !partners.empty(), "make_pairs_with: need normal and partner pulses");
  const int label = partner_class == PulseClass::normal ? 0 : 1;
  std::vector<PulsePair> out;
  if (partner_class == PulseClass::normal) {
    require(normals.size() >= 2, "make_pairs_with: need at least two normal pulses");
    const Index n = static_cast<Index>(normals.size());
    auto pair_at = [&](Index k) {
      Index i = 0;
      while (k >= n - 1 - i) {
        k -= n - 1 - i;
        ++i;
      }
      return IndexPair{normals[static_cast<std::size_t>(i)], normals[static_cast<std::size_t>(i + 1 + k)]};
    };
    for (auto [i, j] : sample_distinct(n * (n - 1) / 2, limit, rng, pair_at)) out.push_back(build_pair(pulses, i, j, label));
    return out;
  }
  const Index p = static_cast<Index>(partners.size());
  auto pair_at = [&](Index k) {
    return IndexPair{normals[static_cast<std::size_t>(k / p)], partners[static_cast<std::size_t>(k % p)]};
  };
  for (auto [i, j] : sample_distinct(static_cast<Index>(normals.size()) * p, limit, rng, pair_at))
    out.push_back(build_pair(pulses, i, j, label));
  return out;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

class CsvReader {
 public:
  explicit CsvReader(const std::filesystem::path& path) : in_(path), path_(path.string()) {
    if (!in_) throw std::runtime_error("cannot open " + path_);
  }

  /// Reads the header and checks it against the expected column names.
  void expect_header(const std::vector<std::string>& columns) {
    std::vector<std::string> fields;
    if (!next(fields)) throw ParseError(path_ + ": missing header", 1);
    if (fields != columns) {
      std::string msg = path_ + ": header mismatch";
      if (fields.size() != columns.size())
        msg += ", expected " + std::to_string(columns.size()) + " columns, found " + std::to_string(fields.size());
      else
        for (std::size_t i = 0; i < fields.size(); ++i)
          if (fields[i] != columns[i]) {
            msg += ", column " + std::to_string(i + 1) + " is '" + fields[i] + "', expected '" + columns[i] + "'";
            break;
          }
      throw ParseError(msg, 1);
    }
    arity_ = columns.size();
  }

  bool next(std::vector<std::string>& fields) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      fields.clear();
      std::string cell;
      std::istringstream ss(line);
      while (std::getline(ss, cell, ',')) fields.push_back(cell);
      if (line.back() == ',') fields.emplace_back();
      if (arity_ && fields.size() != arity_)
        throw ParseError(path_ + ": expected " + std::to_string(arity_) + " fields, found " +
                             std::to_string(fields.size()),
                         line_);
      return true;
    }
    return false;
  }

  double number(const std::string& s) const {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size())
      throw ParseError(path_ + ": cannot parse number '" + s + "'", line_);
    return v;
  }

  bool flag(const std::string& s) const {
    if (s == "0") return false;
    if (s == "1") return true;
    throw ParseError(path_ + ": expected 0 or 1, found '" + s + "'", line_);
  }

  std::size_t line() const { return line_; }

 private:
  std::ifstream in_;
  std::string path_;
  std::size_t line_ = 0;
  std::size_t arity_ = 0;
};

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return f;
}

std::vector<std::string> numbered(const std::string& prefix, Index n) {
  std::vector<std::string> out;
  for (Index i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

std::vector<std::string> pulse_columns() {
  std::vector<std::string> cols{"id", "class"};
  const auto v = numbered("v", kPulseLength);
  cols.insert(cols.end(), v.begin(), v.end());
  return cols;
}

std::vector<std::string> series_columns() {
  std::vector<std::string> cols{"t"};
  const auto c = numbered("ch", kBoosterChannels);
  cols.insert(cols.end(), c.begin(), c.end());
  cols.insert(cols.end(), {"gate", "ood"});
  return cols;
}

std::vector<std::string> window_columns() {
  std::vector<std::string> cols{"id", "target", "gate", "ood"};
  const auto x = numbered("x", kBoosterChannels * kWindowSteps);
  cols.insert(cols.end(), x.begin(), x.end());
  return cols;
}

void write_header(std::ostream& out, const std::vector<std::string>& cols) {
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
}

}  // namespace

void save_pulses(const std::filesystem::path& path, const std::vector<PulseRecord>& pulses) {
  auto f = open_out(path);
  write_header(f, pulse_columns());
  for (const auto& p : pulses) {
    require(p.trace.size() == kPulseLength, "save_pulses: trace must have 256 samples");
    f << p.seed_id << ',' << to_string(p.pulse_class);
    for (Index i = 0; i < kPulseLength; ++i) f << ',' << format_double(p.trace[i]);
    f << '\n';
  }
}

std::vector<PulseRecord> load_pulses(const std::filesystem::path& path) {
  CsvReader in(path);
  in.expect_header(pulse_columns());
  std::vector<PulseRecord> out;
  std::vector<std::string> fields;
  while (in.next(fields)) {
    PulseRecord p;
    p.seed_id = static_cast<std::int64_t>(in.number(fields[0]));
    try {
      p.pulse_class = pulse_class_from_string(fields[1]);
    } catch (const ContractViolation& e) {
      throw ParseError(path.string() + ": " + e.what(), in.line());
    }
    VectorXr trace(kPulseLength);
    for (Index i = 0; i < kPulseLength; ++i) trace[i] = in.number(fields[static_cast<std::size_t>(i + 2)]);
    p.trace = Tensor({kPulseLength}, std::move(trace));
    out.push_back(std::move(p));
  }
  return out;
}

void save_series(const std::filesystem::path& path, const BoosterSeries& series) {
  auto f = open_out(path);
  write_header(f, series_columns());
  const auto ch = series.channels.matrix();
  for (Index t = 0; t < series.length(); ++t) {
    f << t;
    for (Index c = 0; c < kBoosterChannels; ++c) f << ',' << format_double(ch(c, t));
    f << ',' << format_double(series.gate[t]) << ',' << (series.ood_mask[static_cast<std::size_t>(t)] ? 1 : 0) << '\n';
  }
}

BoosterSeries load_series(const std::filesystem::path& path) {
  CsvReader in(path);
  in.expect_header(series_columns());
  std::vector<std::array<double, kBoosterChannels + 1>> rows;
  std::vector<bool> mask;
  std::vector<std::string> fields;
  while (in.next(fields)) {
    if (static_cast<Index>(in.number(fields[0])) != static_cast<Index>(rows.size()))
      throw ParseError(path.string() + ": time index out of sequence", in.line());
    std::array<double, kBoosterChannels + 1> row{};
    for (Index c = 0; c <= kBoosterChannels; ++c) row[static_cast<std::size_t>(c)] = in.number(fields[static_cast<std::size_t>(c + 1)]);
    rows.push_back(row);
    mask.push_back(in.flag(fields.back()));
  }
  if (rows.empty()) throw ParseError(path.string() + ": series has no rows", in.line());
  BoosterSeries s;
  const Index length = static_cast<Index>(rows.size());
  s.channels = Tensor({kBoosterChannels, length});
  s.gate.resize(length);
  auto ch = s.channels.matrix();
  for (Index t = 0; t < length; ++t) {
    for (Index c = 0; c < kBoosterChannels; ++c) ch(c, t) = rows[static_cast<std::size_t>(t)][static_cast<std::size_t>(c)];
    s.gate[t] = rows[static_cast<std::size_t>(t)][kBoosterChannels];
  }
  s.ood_mask = std::move(mask);
  return s;
}

void save_windows(const std::filesystem::path& path, const std::vector<WindowedSample>& windows) {
  auto f = open_out(path);
  write_header(f, window_columns());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto& w = windows[i];
    require(w.inputs.size() == kBoosterChannels * kWindowSteps, "save_windows: window must be [5, 15]");
    f << i << ',' << format_double(w.target) << ',' << format_double(w.gate_value) << ',' << (w.ood_flag ? 1 : 0);
    for (Index k = 0; k < w.inputs.size(); ++k) f << ',' << format_double(w.inputs[k]);
    f << '\n';
  }
}

std::vector<WindowedSample> load_windows(const std::filesystem::path& path) {
  CsvReader in(path);
  in.expect_header(window_columns());
  std::vector<WindowedSample> out;
  std::vector<std::string> fields;
  while (in.next(fields)) {
    WindowedSample w;
    w.target = in.number(fields[1]);
    w.gate_value = in.number(fields[2]);
    w.ood_flag = in.flag(fields[3]);
    VectorXr x(kBoosterChannels * kWindowSteps);
    for (Index k = 0; k < x.size(); ++k) x[k] = in.number(fields[static_cast<std::size_t>(k + 4)]);
    w.inputs = Tensor({kBoosterChannels, kWindowSteps}, std::move(x));
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace dgpa
