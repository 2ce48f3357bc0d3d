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

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "dgpa/tensor.hpp"

namespace dgpa {

inline constexpr Index kPulseLength = 256;
inline constexpr Index kBoosterChannels = 5;
inline constexpr Index kWindowSteps = 15;
/// Channel carrying the predicted variable (and the cyclic OOD excursions).
inline constexpr Index kBoosterOutputChannel = 1;
inline constexpr double kGateThreshold = 0.995;

enum class PulseClass { normal, anomaly_a, anomaly_b };

std::string to_string(PulseClass c);
PulseClass pulse_class_from_string(const std::string& s);

struct PulseRecord {
  Tensor trace;  // [256]
  PulseClass pulse_class = PulseClass::normal;
  std::int64_t seed_id = 0;
};

struct PulseCounts {
  Index normal = 0;
  Index anomaly_a = 0;
  Index anomaly_b = 0;
};

/// Noise-free trapezoidal base pulse shared by all classes.
VectorXr base_pulse();

/// normal: trapezoid + N(0, 0.02^2) noise. anomaly_a: normal with a 20-40%
/// mid-pulse droop at a random onset. anomaly_b: normal with a superposed
/// oscillation of period 8-16 samples and amplitude 0.2-0.4.
std::vector<PulseRecord> gen_pulses(const PulseCounts& counts, RngStream rng);

struct BoosterSeries {
  Tensor channels;  // [5, T]
  VectorXr gate;    // [T], in [0.9, 1.0]
  std::vector<bool> ood_mask;

  Index length() const { return channels.dim(1); }
};

/// Coupled slow drifts plus noise on five channels. Inside each [start, end)
/// segment the output channel carries a high-amplitude cycle and the gate
/// exceeds 0.995; elsewhere the gate stays below it.
BoosterSeries gen_booster_series(Index length, const std::vector<std::pair<Index, Index>>& ood_segments,
                                 RngStream rng);

struct WindowedSample {
  Tensor inputs;  // [5, 15]
  double target = 0.0;
  double gate_value = 0.0;
  bool ood_flag = false;
};

/// Stride-1 windows: inputs = channels[:, k..k+15), target/gate/ood taken at step k+15.
std::vector<WindowedSample> make_windows(const BoosterSeries& series, Index output_channel = kBoosterOutputChannel);

/// Keeps windows with gate_value <= threshold, in order.
std::vector<WindowedSample> filter_windows(const std::vector<WindowedSample>& windows,
                                           double threshold = kGateThreshold);

struct PulsePair {
  Tensor trace_a;  // [1, 256]
  Tensor trace_b;  // [1, 256]
  int label = 0;   // 0 = normal-normal, 1 = normal-anomalous
  Index index_a = 0;
  Index index_b = 0;
  PulseClass anomaly_class = PulseClass::normal;
};

/// Samples distinct normal-normal (label 0) and normal-anomaly (label 1)
/// pairs, up to `pairs_per_label` each. With `unseen_excluded`, anomaly_b
/// pulses are never used.
std::vector<PulsePair> make_pairs(const std::vector<PulseRecord>& pulses, Index pairs_per_label,
                                  bool unseen_excluded, RngStream rng);

/// Normal pulses paired with every pulse of `partner_class`, up to `limit` pairs;
/// used to build class-specific test sets.
std::vector<PulsePair> make_pairs_with(const std::vector<PulseRecord>& pulses, PulseClass partner_class, Index limit,
                                       RngStream rng);

// CSV round trips. Values are written with 17 significant digits.
void save_pulses(const std::filesystem::path& path, const std::vector<PulseRecord>& pulses);
std::vector<PulseRecord> load_pulses(const std::filesystem::path& path);
void save_series(const std::filesystem::path& path, const BoosterSeries& series);
BoosterSeries load_series(const std::filesystem::path& path);
void save_windows(const std::filesystem::path& path, const std::vector<WindowedSample>& windows);
std::vector<WindowedSample> load_windows(const std::filesystem::path& path);

/// "%.17g" rendering used by every CSV writer.
std::string format_double(double v);

}  // namespace dgpa
