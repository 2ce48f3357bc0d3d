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

#include <gtest/gtest.h>

#include <cstdlib>

#include "cli_support.hpp"
#include "dgpa/config.hpp"
#include "dgpa/evalkit.hpp"

namespace dgpa {
namespace {

namespace fs = std::filesystem;
using testing::read_bytes;
using testing::run_cli_args;
using testing::snapshot;

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    unsetenv("DGPA_SEED");
    root = fs::temp_directory_path() / ("dgpa_test_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root);
    fs::create_directories(root);
    config = (root / "small.ini").string();
    std::ofstream(config) << testing::kSmallConfig;
  }
  void TearDown() override { unsetenv("DGPA_SEED"); }
  std::string path(const std::string& name) const { return (root / name).string(); }

  fs::path root;
  std::string config;
};

TEST_F(Cli, EvaluateWithoutCheckpointIsUsageError) {
  ASSERT_EQ(run_cli_args({"gen-data", "--config", config, "--out", path("d")}).code, 0);
  const auto r = run_cli_args({"evaluate", "--config", config, "--data", path("d"), "--out", path("e")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--checkpoint"), std::string::npos) << r.err;
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run_cli_args({}).code, 2);
  EXPECT_EQ(run_cli_args({"bogus"}).code, 2);
  EXPECT_EQ(run_cli_args({"gen-data", "--out", path("d"), "--bogus"}).code, 2);
  EXPECT_EQ(run_cli_args({"gen-data"}).code, 2);
  EXPECT_EQ(run_cli_args({"train-siamese", "--out", path("t"), "--data", path("missing")}).code, 2);
  EXPECT_EQ(run_cli_args({"gen-data", "--help"}).code, 0);
}

TEST_F(Cli, ConfigErrorsExitTwo) {
  const std::string bad = path("bad.ini");
  std::ofstream(bad) << "[surrogate]\nepoch = 3\n";
  auto r = run_cli_args({"gen-data", "--config", bad, "--out", path("d")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("surrogate.epoch"), std::string::npos);
  EXPECT_NE(r.err.find("line 2"), std::string::npos);
  std::ofstream(bad) << "[surrogate]\nepochs = -1\n";
  EXPECT_EQ(run_cli_args({"gen-data", "--config", bad, "--out", path("d")}).code, 2);
}

TEST_F(Cli, CorruptCheckpointExitsTwo) {
  ASSERT_EQ(run_cli_args({"gen-data", "--config", config, "--out", path("d")}).code, 0);
  std::ofstream(path("junk.ckpt")) << "not a checkpoint";
  EXPECT_EQ(run_cli_args({"evaluate", "--config", config, "--data", path("d"), "--checkpoint", path("junk.ckpt"), "--out",
                          path("e")})
                .code,
            2);
}

TEST_F(Cli, GenDataDeterministicAndEchoesConfig) {
  ASSERT_EQ(run_cli_args({"gen-data", "--config", config, "--seed", "7", "--out", path("a")}).code, 0);
  ASSERT_EQ(run_cli_args({"gen-data", "--config", config, "--seed", "7", "--out", path("b")}).code, 0);
  const auto a = snapshot(path("a")), b = snapshot(path("b"));
  EXPECT_EQ(a, b);
  for (const char* f : {"pulses_train.csv", "pulses_test.csv", "series.csv", "windows.csv", "config.ini", "VERSION"})
    EXPECT_TRUE(a.count(f)) << f;
  const RunConfig echoed = parse_config(a.at("config.ini"));
  EXPECT_EQ(echoed.seed, 7u);
  EXPECT_EQ(echoed.data.train_normal, 8);
  EXPECT_EQ(a.at("VERSION"), std::string("dgpa ") + DGPA_VERSION + "\n");
  EXPECT_EQ(load_pulses(path("a/pulses_train.csv")).size(), 12u);

  ASSERT_EQ(run_cli_args({"gen-data", "--config", config, "--seed", "8", "--out", path("c")}).code, 0);
  EXPECT_NE(read_bytes(path("a/pulses_train.csv")), read_bytes(path("c/pulses_train.csv")));
}

TEST_F(Cli, SeedPrecedence) {
  setenv("DGPA_SEED", "99", 1);
  ASSERT_EQ(run_cli_args({"gen-data", "--config", config, "--out", path("env")}).code, 0);
  EXPECT_EQ(parse_config(read_bytes(path("env/config.ini"))).seed, 99u);
  ASSERT_EQ(run_cli_args({"gen-data", "--config", config, "--seed", "5", "--out", path("flag")}).code, 0);
  EXPECT_EQ(parse_config(read_bytes(path("flag/config.ini"))).seed, 5u);
  setenv("DGPA_SEED", "x1", 1);
  EXPECT_EQ(run_cli_args({"gen-data", "--config", config, "--out", path("bad")}).code, 2);
}

TEST_F(Cli, PipelineProducesArtifacts) {
  ASSERT_EQ(run_cli_args({"gen-data", "--config", config, "--out", path("d")}).code, 0);
  ASSERT_EQ(run_cli_args({"train-siamese", "--config", config, "--data", path("d"), "--out", path("s")}).code, 0);
  ASSERT_EQ(run_cli_args({"train-surrogate", "--config", config, "--data", path("d"), "--out", path("u")}).code, 0);
  ASSERT_EQ(run_cli_args({"evaluate", "--config", config, "--data", path("d"), "--checkpoint", path("s/siamese.ckpt"),
                          "--out", path("es")})
                .code,
            0);
  ASSERT_EQ(run_cli_args({"evaluate", "--config", config, "--data", path("d"), "--checkpoint",
                          path("u/surrogate.ckpt"), "--out", path("eu")})
                .code,
            0);
  ASSERT_EQ(run_cli_args({"probe-ood", "--config", config, "--data", path("d"), "--checkpoint",
                          path("u/surrogate.ckpt"), "--out", path("p")})
                .code,
            0);

  const EvalReport siamese = report_from_json(read_bytes(path("es/report.json")));
  EXPECT_TRUE(siamese.roc.has_value());
  EXPECT_TRUE(siamese.band.has_value());
  EXPECT_EQ(siamese.band->trials, 10);
  EXPECT_TRUE(siamese.uncertainty_ratio.has_value());
  EXPECT_EQ(siamese.class_uncertainty.size(), 3u);
  EXPECT_EQ(siamese.seed, 42u);
  EXPECT_EQ(siamese.config.at("siamese.epochs"), "1");

  const EvalReport surrogate = report_from_json(read_bytes(path("eu/report.json")));
  EXPECT_TRUE(surrogate.uncertainty_ratio.has_value());
  EXPECT_TRUE(surrogate.class_uncertainty.count("ood"));

  const std::string predictions = read_bytes(path("eu/predictions.csv"));
  EXPECT_EQ(predictions.substr(0, predictions.find('\n')), "window_id,target,mean,std,ood_flag");
  const std::string probe = read_bytes(path("p/probe.csv"));
  EXPECT_EQ(std::count(probe.begin(), probe.end(), '\n'), 6);  // header + 5 increments
  EXPECT_EQ(probe.substr(0, probe.find('\n')), "increment,mean,std");
}

TEST_F(Cli, ProbeBaseWindowOutOfRangeIsContractViolation) {
  const std::string cfg = path("far.ini");
  std::string text = testing::kSmallConfig;
  text.replace(text.find("base_window = 3"), 15, "base_window = 999");
  std::ofstream(cfg) << text;
  ASSERT_EQ(run_cli_args({"gen-data", "--config", cfg, "--out", path("d")}).code, 0);
  ASSERT_EQ(run_cli_args({"train-surrogate", "--config", cfg, "--data", path("d"), "--out", path("u")}).code, 0);
  EXPECT_EQ(run_cli_args({"probe-ood", "--config", cfg, "--data", path("d"), "--checkpoint", path("u/surrogate.ckpt"),
                          "--out", path("p")})
                .code,
            1);
}

TEST_F(Cli, GradcheckPasses) {
  const auto r = run_cli_args({"gradcheck", "--out", path("g")});
  EXPECT_EQ(r.code, 0) << r.out;
  const std::string csv = read_bytes(path("g/gradcheck.csv"));
  EXPECT_NE(csv.find("siamese_objective"), std::string::npos);
  EXPECT_NE(csv.find("surrogate_objective"), std::string::npos);
  EXPECT_EQ(csv.find(",0\n"), std::string::npos);
}

}  // namespace
}  // namespace dgpa
