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

#include "dgpa/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <vector>

namespace dgpa {
namespace {

using Slot = std::variant<Index*, int*, double*, std::uint64_t*>;

struct Field {
  const char* section;
  const char* key;
  Slot slot;
};

// Canonical key order; serialization and parsing both walk this table.
std::vector<Field> fields(RunConfig& c) {
  auto& d = c.data;
  auto& s = c.siamese;
  auto& u = c.surrogate;
  return {
      {"run", "seed", &c.seed},
      {"data", "train_normal", &d.train_normal},
      {"data", "train_anomaly_a", &d.train_anomaly_a},
      {"data", "train_anomaly_b", &d.train_anomaly_b},
      {"data", "test_normal", &d.test_normal},
      {"data", "test_anomaly_a", &d.test_anomaly_a},
      {"data", "test_anomaly_b", &d.test_anomaly_b},
      {"data", "series_steps", &d.series_steps},
      {"data", "ood_start", &d.ood_start},
      {"data", "ood_end", &d.ood_end},
      {"data", "gate_threshold", &d.gate_threshold},
      {"siamese", "epochs", &s.model.epochs},
      {"siamese", "batch_size", &s.model.batch_size},
      {"siamese", "lr", &s.model.adam.lr},
      {"siamese", "alpha", &s.model.contrastive.alpha},
      {"siamese", "margin", &s.model.contrastive.margin},
      {"siamese", "head_units", &s.model.head_units},
      {"siamese", "rff_dim", &s.model.rff_dim},
      {"siamese", "length_scale", &s.model.length_scale},
      {"siamese", "ridge", &s.model.ridge},
      {"siamese", "spectral_bound", &s.model.spectral_bound},
      {"siamese", "power_iterations", &s.model.power_iterations},
      {"siamese", "final_power_iterations", &s.model.final_power_iterations},
      {"siamese", "pairs_per_label", &s.pairs_per_label},
      {"siamese", "test_pairs", &s.test_pairs},
      {"surrogate", "epochs", &u.epochs},
      {"surrogate", "batch_size", &u.batch_size},
      {"surrogate", "lr", &u.adam.lr},
      {"surrogate", "l1", &u.lipschitz.l1},
      {"surrogate", "l2", &u.lipschitz.l2},
      {"surrogate", "lipschitz_weight", &u.lipschitz.weight},
      {"surrogate", "pairs_per_batch", &u.lipschitz.pairs_per_batch},
      {"surrogate", "rff_dim", &u.rff_dim},
      {"surrogate", "length_scale", &u.length_scale},
      {"surrogate", "noise_var", &u.noise_var},
      {"evaluate", "smear_trials", &c.evaluate.smear_trials},
      {"evaluate", "grid_points", &c.evaluate.grid_points},
      {"probe", "channel", &c.probe.channel},
      {"probe", "base_window", &c.probe.base_window},
      {"probe", "max_increment", &c.probe.max_increment},
      {"probe", "steps", &c.probe.steps},
      {"gradcheck", "step", &c.gradcheck.step},
      {"gradcheck", "objective_step", &c.gradcheck.objective_step},
      {"gradcheck", "tolerance", &c.gradcheck.tolerance},
      {"gradcheck", "coordinates", &c.gradcheck.coordinates},
  };
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <typename T>
bool parse_number(const std::string& text, T& out) {
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end;
}

bool assign(const Slot& slot, const std::string& value) {
  return std::visit([&](auto* p) { return parse_number(value, *p); }, slot);
}

std::string render(const Slot& slot) {
  return std::visit(
      [](auto* p) -> std::string {
        // Shortest text that parses back to the same value.
        char buf[64];
        const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, *p);
        return std::string(buf, end);
      },
      slot);
}

struct Check {
  const char* key;
  bool ok;
  const char* rule;
};

}  // namespace

void validate_config(const RunConfig& c) {
  const auto& d = c.data;
  const auto& s = c.siamese.model;
  const auto& u = c.surrogate;
  const std::vector<Check> checks{
      {"data.train_normal", d.train_normal >= 0, ">= 0"},
      {"data.train_anomaly_a", d.train_anomaly_a >= 0, ">= 0"},
      {"data.train_anomaly_b", d.train_anomaly_b >= 0, ">= 0"},
      {"data.test_normal", d.test_normal >= 0, ">= 0"},
      {"data.test_anomaly_a", d.test_anomaly_a >= 0, ">= 0"},
      {"data.test_anomaly_b", d.test_anomaly_b >= 0, ">= 0"},
      {"data.series_steps", d.series_steps >= kWindowSteps + 1, ">= 16"},
      {"data.ood_start", d.ood_start >= 0 && d.ood_start <= d.ood_end, "0 <= ood_start <= ood_end"},
      {"data.ood_end", d.ood_end <= d.series_steps, "<= series_steps"},
      {"data.gate_threshold", d.gate_threshold > 0.0 && d.gate_threshold < 1.0, "in (0, 1)"},
      {"siamese.epochs", s.epochs >= 0, ">= 0"},
      {"siamese.batch_size", s.batch_size >= 2, ">= 2"},
      {"siamese.lr", s.adam.lr > 0.0, "> 0"},
      {"siamese.alpha", s.contrastive.alpha > 0.0 && s.contrastive.alpha < 1.0, "in (0, 1)"},
      {"siamese.margin", s.contrastive.margin > 0.0, "> 0"},
      {"siamese.head_units", s.head_units > 0, "> 0"},
      {"siamese.rff_dim", s.rff_dim > 0, "> 0"},
      {"siamese.length_scale", s.length_scale > 0.0, "> 0"},
      {"siamese.ridge", s.ridge > 0.0, "> 0"},
      {"siamese.spectral_bound", s.spectral_bound > 0.0, "> 0"},
      {"siamese.power_iterations", s.power_iterations >= 1, ">= 1"},
      {"siamese.final_power_iterations", s.final_power_iterations >= 0, ">= 0"},
      {"siamese.pairs_per_label", c.siamese.pairs_per_label >= 1, ">= 1"},
      {"siamese.test_pairs", c.siamese.test_pairs >= 1, ">= 1"},
      {"surrogate.epochs", u.epochs >= 0, ">= 0"},
      {"surrogate.batch_size", u.batch_size >= 2, ">= 2"},
      {"surrogate.lr", u.adam.lr > 0.0, "> 0"},
      {"surrogate.l1", u.lipschitz.l1 > 0.0 && u.lipschitz.l1 <= u.lipschitz.l2, "in (0, l2]"},
      {"surrogate.l2", u.lipschitz.l2 > 0.0, "> 0"},
      {"surrogate.lipschitz_weight", u.lipschitz.weight >= 0.0, ">= 0"},
      {"surrogate.pairs_per_batch", u.lipschitz.pairs_per_batch >= 1, ">= 1"},
      {"surrogate.rff_dim", u.rff_dim > 0, "> 0"},
      {"surrogate.length_scale", u.length_scale > 0.0, "> 0"},
      {"surrogate.noise_var", u.noise_var > 0.0, "> 0"},
      {"evaluate.smear_trials", c.evaluate.smear_trials >= 1, ">= 1"},
      {"evaluate.grid_points", c.evaluate.grid_points >= 2, ">= 2"},
      {"probe.channel", c.probe.channel >= 0 && c.probe.channel < kBoosterChannels, "in [0, 5)"},
      {"probe.base_window", c.probe.base_window >= 0, ">= 0"},
      {"probe.max_increment", c.probe.max_increment >= 0.0, ">= 0"},
      {"probe.steps", c.probe.steps >= 1, ">= 1"},
      {"gradcheck.step", c.gradcheck.step > 0.0 && c.gradcheck.step <= 1e-2, "in (0, 0.01]"},
      {"gradcheck.objective_step", c.gradcheck.objective_step > 0.0 && c.gradcheck.objective_step <= 1e-2, "in (0, 0.01]"},
      {"gradcheck.tolerance", c.gradcheck.tolerance > 0.0, "> 0"},
      {"gradcheck.coordinates", c.gradcheck.coordinates >= 32, ">= 32"},
  };
  for (const auto& chk : checks)
    if (!chk.ok) throw ParseError(std::string("config: ") + chk.key + " must be " + chk.rule, 0);
}

RunConfig parse_config(const std::string& text) {
  RunConfig config;
  const std::vector<Field> table = fields(config);
  std::set<std::string> sections;
  for (const auto& f : table) sections.insert(f.section);
  std::map<std::string, std::size_t> seen;  // "section.key" -> line

  std::istringstream in(text);
  std::string raw, section;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(raw.substr(0, raw.find_first_of("#;")));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ParseError("config: malformed section header '" + s + "'", line);
      section = trim(s.substr(1, s.size() - 2));
      if (!sections.count(section)) throw ParseError("config: unknown section '" + section + "'", line);
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ParseError("config: expected 'key = value', found '" + s + "'", line);
    const std::string key = trim(s.substr(0, eq)), value = trim(s.substr(eq + 1));
    if (section.empty()) throw ParseError("config: key '" + key + "' appears before any [section]", line);
    const std::string full = section + "." + key;
    const auto it = std::find_if(table.begin(), table.end(),
                                 [&](const Field& f) { return f.section == section && f.key == key; });
    if (it == table.end()) throw ParseError("config: unknown key '" + full + "'", line);
    if (seen.count(full))
      throw ParseError("config: duplicate key '" + full + "' (first set on line " + std::to_string(seen[full]) + ")", line);
    seen[full] = line;
    if (!assign(it->slot, value)) throw ParseError("config: invalid value '" + value + "' for '" + full + "'", line);
  }
  try {
    validate_config(config);
  } catch (const ParseError& e) {
    // Point at the line that set the offending key when there is one.
    const std::string msg = e.what();
    for (const auto& [key, at] : seen)
      if (msg.find("config: " + key + " ") == 0) throw ParseError(msg, at);
    throw;
  }
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open config " + path.string());
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_config(buf.str());
}

std::string serialize_config(const RunConfig& config) {
  RunConfig copy = config;
  std::string out, section;
  for (const auto& f : fields(copy)) {
    if (section != f.section) {
      if (!section.empty()) out += "\n";
      section = f.section;
      out += "[" + section + "]\n";
    }
    out += std::string(f.key) + " = " + render(f.slot) + "\n";
  }
  return out;
}

}  // namespace dgpa
