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

#include "cli.hpp"

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"

#include "dgpa/config.hpp"
#include "dgpa/evalkit.hpp"
#include "dgpa/gradsuite.hpp"

namespace dgpa {
namespace {

namespace fs = std::filesystem;

// Streams derived from the run seed, one per task stage.
enum StreamTag : std::uint64_t {
  kTrainPulses = 1,
  kTestPulses = 2,
  kSeries = 3,
  kSiamesePairs = 10,
  kSiameseTrain = 11,
  kSurrogateTrain = 20,
  kEvalNormal = 30,
  kEvalSeen = 31,
  kEvalUnseen = 32,
  kEvalSmear = 33,
};

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string data;
  std::string checkpoint;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

class Run {
 public:
  Run(const Options& o, std::ostream& out) : opts_(o), log_(out) {
    config_ = o.config.empty() ? RunConfig{} : load_config(o.config);
    if (const char* env = std::getenv("DGPA_SEED")) {
      std::uint64_t s = 0;
      const std::string v = env;
      const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), s);
      if (ec != std::errc() || p != v.data() + v.size()) throw ParseError("DGPA_SEED is not an unsigned integer: '" + v + "'", 0);
      config_.seed = s;
    }
    if (o.seed) config_.seed = *o.seed;
    out_ = o.out;
    fs::create_directories(out_);
    write_text(out_ / "config.ini", serialize_config(config_));
    write_text(out_ / "VERSION", std::string("dgpa ") + DGPA_VERSION + "\n");
  }

  const RunConfig& config() const { return config_; }
  RngStream stream(StreamTag tag) const { return RngStream(config_.seed).split(tag); }
  fs::path out(const std::string& name) const { return out_ / name; }
  fs::path data(const std::string& name) const { return fs::path(opts_.data) / name; }
  const std::string& checkpoint() const { return opts_.checkpoint; }
  std::ostream& log() { return log_; }

 private:
  Options opts_;
  std::ostream& log_;
  RunConfig config_;
  fs::path out_;
};

std::string history_csv(const TrainingHistory& history) {
  std::string s = "epoch,loss\n";
  for (std::size_t i = 0; i < history.size(); ++i) s += std::to_string(i) + "," + format_double(history[i]) + "\n";
  return s;
}

std::map<std::string, std::string> config_echo(const RunConfig& c) {
  std::map<std::string, std::string> out;
  std::istringstream in(serialize_config(c));
  std::string line, section;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.front() == '[') {
      section = line.substr(1, line.size() - 2);
      continue;
    }
    const auto eq = line.find(" = ");
    out[section + "." + line.substr(0, eq)] = line.substr(eq + 3);
  }
  return out;
}

int gen_data(Run& run) {
  const auto& d = run.config().data;
  const auto train = gen_pulses({d.train_normal, d.train_anomaly_a, d.train_anomaly_b}, run.stream(kTrainPulses));
  const auto test = gen_pulses({d.test_normal, d.test_anomaly_a, d.test_anomaly_b}, run.stream(kTestPulses));
  std::vector<std::pair<Index, Index>> segments;
  if (d.ood_end > d.ood_start) segments.push_back({d.ood_start, d.ood_end});
  const auto series = gen_booster_series(d.series_steps, segments, run.stream(kSeries));
  const auto windows = make_windows(series);
  save_pulses(run.out("pulses_train.csv"), train);
  save_pulses(run.out("pulses_test.csv"), test);
  save_series(run.out("series.csv"), series);
  save_windows(run.out("windows.csv"), windows);
  run.log() << "gen-data: " << train.size() << " training pulses, " << test.size() << " test pulses, "
            << windows.size() << " windows\n";
  return 0;
}

int train_siamese_task(Run& run) {
  const auto& s = run.config().siamese;
  const auto pulses = load_pulses(run.data("pulses_train.csv"));
  const auto pairs = make_pairs(pulses, s.pairs_per_label, true, run.stream(kSiamesePairs));
  const auto trained = train_siamese(pairs, s.model, run.stream(kSiameseTrain));
  save_checkpoint(run.out("siamese.ckpt"), trained.model.export_bundle());
  write_text(run.out("history.csv"), history_csv(trained.history));
  run.log() << "train-siamese: " << pairs.size() << " pairs, final loss "
            << (trained.history.empty() ? 0.0 : trained.history.back()) << "\n";
  return 0;
}

int train_surrogate_task(Run& run) {
  const auto windows = filter_windows(load_windows(run.data("windows.csv")), run.config().data.gate_threshold);
  const auto trained = train_surrogate(windows, run.config().surrogate, run.stream(kSurrogateTrain));
  save_checkpoint(run.out("surrogate.ckpt"), trained.model.export_bundle());
  write_text(run.out("history.csv"), history_csv(trained.history));
  run.log() << "train-surrogate: " << windows.size() << " windows, final MAPE "
            << (trained.history.empty() ? 0.0 : trained.history.back()) << "\n";
  return 0;
}

bool is_surrogate(const TensorBundle& bundle) { return bundle.count("surrogate.config") > 0; }

double mean_std(const std::vector<double>& stds) {
  double s = 0.0;
  for (double v : stds) s += v;
  return stds.empty() ? 0.0 : s / static_cast<double>(stds.size());
}

int evaluate_siamese(Run& run, const TensorBundle& bundle) {
  const RunConfig& cfg = run.config();
  SiameseModel model = SiameseModel::from_bundle(bundle);
  const auto test = load_pulses(run.data("pulses_test.csv"));
  auto has = [&](PulseClass c) {
    return std::any_of(test.begin(), test.end(), [&](const PulseRecord& p) { return p.pulse_class == c; });
  };
  struct Group {
    const char* name;
    PulseClass partner;
    StreamTag tag;
  };
  EvalReport report;
  report.seed = cfg.seed;
  report.config = config_echo(cfg);
  std::string csv = "pair_id,group,label,index_a,index_b,score,logit,probability,std\n";
  std::vector<double> logits, stds;
  std::vector<int> labels;
  std::map<std::string, std::vector<double>> group_stds;
  Index id = 0;
  for (const Group& g : {Group{"normal", PulseClass::normal, kEvalNormal}, Group{"anomaly_a", PulseClass::anomaly_a, kEvalSeen},
                         Group{"anomaly_b", PulseClass::anomaly_b, kEvalUnseen}}) {
    if (!has(g.partner)) continue;
    const auto pairs = make_pairs_with(test, g.partner, cfg.siamese.test_pairs, run.stream(g.tag));
    const auto preds = predict_pairs(model, pairs);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const double logit = model.logit(preds[i].score);
      csv += std::to_string(id++) + "," + g.name + "," + std::to_string(pairs[i].label) + "," +
             std::to_string(pairs[i].index_a) + "," + std::to_string(pairs[i].index_b) + "," + format_double(preds[i].score) +
             "," + format_double(logit) + "," + format_double(preds[i].probability) + "," +
             format_double(preds[i].uncertainty) + "\n";
      group_stds[g.name].push_back(preds[i].uncertainty);
      if (g.partner != PulseClass::anomaly_b) {
        logits.push_back(logit);
        stds.push_back(preds[i].uncertainty);
        labels.push_back(pairs[i].label);
      }
    }
  }
  for (const auto& [name, v] : group_stds) report.class_uncertainty[name] = mean_std(v);
  const bool both = std::count(labels.begin(), labels.end(), 1) > 0 && std::count(labels.begin(), labels.end(), 0) > 0;
  if (both) {
    report.roc = roc_curve(logits, labels);
    report.band = roc_with_smearing(logits, stds, labels, cfg.evaluate.smear_trials, run.stream(kEvalSmear),
                                    static_cast<std::size_t>(cfg.evaluate.grid_points));
  }
  if (group_stds.count("anomaly_a") && group_stds.count("anomaly_b"))
    report.uncertainty_ratio = mean_std(group_stds["anomaly_b"]) / mean_std(group_stds["anomaly_a"]);
  write_text(run.out("predictions.csv"), csv);
  write_text(run.out("report.json"), report_to_json(report));
  run.log() << "evaluate: siamese, " << id << " pairs";
  if (report.roc) run.log() << ", AUC " << report.roc->auc;
  run.log() << "\n";
  return 0;
}

int evaluate_surrogate(Run& run, const TensorBundle& bundle) {
  const RunConfig& cfg = run.config();
  SurrogateModel model = SurrogateModel::from_bundle(bundle);
  const auto windows = load_windows(run.data("windows.csv"));
  const auto preds = predict_windows(model, windows);
  std::string csv = "window_id,target,mean,std,ood_flag\n";
  std::vector<double> stds, id_stds, ood_stds;
  std::vector<bool> flags;
  std::vector<int> labels;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const bool ood = windows[i].ood_flag;
    csv += std::to_string(i) + "," + format_double(windows[i].target) + "," + format_double(preds[i].mean) + "," +
           format_double(preds[i].stddev) + "," + (ood ? "1" : "0") + "\n";
    stds.push_back(preds[i].stddev);
    flags.push_back(ood);
    labels.push_back(ood ? 1 : 0);
    (ood ? ood_stds : id_stds).push_back(preds[i].stddev);
  }
  EvalReport report;
  report.seed = cfg.seed;
  report.config = config_echo(cfg);
  if (!id_stds.empty()) report.class_uncertainty["in_distribution"] = mean_std(id_stds);
  if (!ood_stds.empty()) report.class_uncertainty["ood"] = mean_std(ood_stds);
  if (!id_stds.empty() && !ood_stds.empty()) {
    report.uncertainty_ratio = uncertainty_ratio(stds, flags);
    report.roc = roc_curve(stds, labels);  // predictive std as an OOD detector score
  }
  write_text(run.out("predictions.csv"), csv);
  write_text(run.out("report.json"), report_to_json(report));
  run.log() << "evaluate: surrogate, " << windows.size() << " windows";
  if (report.uncertainty_ratio) run.log() << ", uncertainty ratio " << *report.uncertainty_ratio;
  run.log() << "\n";
  return 0;
}

int evaluate(Run& run) {
  const TensorBundle bundle = load_checkpoint(run.checkpoint());
  return is_surrogate(bundle) ? evaluate_surrogate(run, bundle) : evaluate_siamese(run, bundle);
}

int probe_ood(Run& run) {
  const auto& p = run.config().probe;
  SurrogateModel model = SurrogateModel::from_bundle(load_checkpoint(run.checkpoint()));
  const auto windows = filter_windows(load_windows(run.data("windows.csv")), run.config().data.gate_threshold);
  if (p.base_window >= static_cast<Index>(windows.size()))
    throw ContractViolation("probe-ood: base_window " + std::to_string(p.base_window) + " exceeds the " +
                            std::to_string(windows.size()) + " in-distribution windows");
  std::vector<double> increments;
  for (Index k = 0; k <= p.steps; ++k) increments.push_back(p.max_increment * static_cast<double>(k) / static_cast<double>(p.steps));
  const auto preds = ramp_probe(model, windows[static_cast<std::size_t>(p.base_window)], p.channel, increments);
  std::string csv = "increment,mean,std\n";
  for (std::size_t i = 0; i < preds.size(); ++i)
    csv += format_double(increments[i]) + "," + format_double(preds[i].mean) + "," + format_double(preds[i].stddev) + "\n";
  write_text(run.out("probe.csv"), csv);
  run.log() << "probe-ood: std " << preds.front().stddev << " -> " << preds.back().stddev << "\n";
  return 0;
}

int gradcheck(Run& run) {
  const auto& g = run.config().gradcheck;
  const auto entries = run_gradient_suite(run.config().seed, {g.step, g.objective_step, g.coordinates});
  std::string csv = "check,coordinates,max_relative_error,passed\n";
  bool all = true;
  for (const auto& e : entries) {
    const bool ok = e.max_relative_error < g.tolerance;
    all = all && ok;
    csv += e.name + "," + std::to_string(e.coordinates_checked) + "," + format_double(e.max_relative_error) + "," +
           (ok ? "1" : "0") + "\n";
    run.log() << (ok ? "PASS " : "FAIL ") << e.name << " " << e.max_relative_error << "\n";
  }
  write_text(run.out("gradcheck.csv"), csv);
  return all ? 0 : 1;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Deep Gaussian process approximation toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("dgpa ") + DGPA_VERSION);
  Options opts;

  struct Task {
    const char* name;
    const char* help;
    bool data;
    bool checkpoint;
    int (*fn)(Run&);
  };
  const std::vector<Task> tasks{
      {"gen-data", "Generate pulse and booster datasets", false, false, gen_data},
      {"train-siamese", "Train the Siamese classifier", true, false, train_siamese_task},
      {"train-surrogate", "Train the regression surrogate", true, false, train_surrogate_task},
      {"evaluate", "Evaluate a checkpoint on the test data", true, true, evaluate},
      {"probe-ood", "Ramp one surrogate input channel out of distribution", true, true, probe_ood},
      {"gradcheck", "Finite-difference gradient checks", false, false, gradcheck},
  };
  std::vector<std::pair<CLI::App*, const Task*>> subs;
  for (const Task& t : tasks) {
    CLI::App* sub = app.add_subcommand(t.name, t.help);
    sub->add_option("--config", opts.config, "Config file (defaults when omitted)")->check(CLI::ExistingFile);
    sub->add_option("--seed", opts.seed, "Seed; overrides DGPA_SEED and the config");
    sub->add_option("--out", opts.out, "Output directory")->required();
    if (t.data) sub->add_option("--data", opts.data, "Directory written by gen-data")->required()->check(CLI::ExistingDirectory);
    if (t.checkpoint) sub->add_option("--checkpoint", opts.checkpoint, "Model checkpoint")->required();
    subs.emplace_back(sub, &t);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    for (auto& [sub, task] : subs) {
      if (!sub->parsed()) continue;
      Run run(opts, out);
      return task->fn(run);
    }
    return 2;
  } catch (const ContractViolation& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    // ParseError, filesystem and stream failures.
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace dgpa
