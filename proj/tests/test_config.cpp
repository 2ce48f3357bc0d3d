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

#include <filesystem>
#include <fstream>

#include "dgpa/config.hpp"

namespace dgpa {
namespace {

std::size_t parse_error_line(const std::string& text, std::string* message = nullptr) {
  try {
    parse_config(text);
  } catch (const ParseError& e) {
    if (message) *message = e.what();
    return e.line();
  }
  ADD_FAILURE() << "expected ParseError for:\n" << text;
  return 0;
}

TEST(Config, EmptyTextGivesDefaults) {
  const RunConfig c = parse_config("");
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.surrogate.lipschitz.l1, 0.75);
  EXPECT_EQ(c.surrogate.lipschitz.l2, 1.25);
  EXPECT_EQ(c.surrogate.lipschitz.weight, 0.1);
  EXPECT_EQ(c.surrogate.epochs, 30);
  EXPECT_EQ(c.siamese.model.epochs, 20);
  EXPECT_EQ(c.siamese.model.contrastive.alpha, 0.5);
  EXPECT_EQ(c.siamese.model.rff_dim, 256);
  EXPECT_EQ(c.evaluate.smear_trials, 250);
  EXPECT_EQ(c.evaluate.grid_points, 512);
  EXPECT_EQ(c.data.gate_threshold, 0.995);
}

TEST(Config, ParsesValuesAndComments) {
  const RunConfig c = parse_config(
      "# run settings\n"
      "[run]\n"
      "seed = 18446744073709551615\n"
      "\n"
      "[surrogate]\n"
      "epochs = 3   ; short run\n"
      "l1=0.5\n"
      "noise_var = 2e-3\n"
      "[siamese]\n"
      "  margin = 2.5\n");
  EXPECT_EQ(c.seed, 18446744073709551615ull);
  EXPECT_EQ(c.surrogate.epochs, 3);
  EXPECT_EQ(c.surrogate.lipschitz.l1, 0.5);
  EXPECT_EQ(c.surrogate.lipschitz.l2, 1.25);
  EXPECT_EQ(c.surrogate.noise_var, 2e-3);
  EXPECT_EQ(c.siamese.model.contrastive.margin, 2.5);
}

TEST(Config, UnknownKeyNamesKeyAndLine) {
  std::string msg;
  EXPECT_EQ(parse_error_line("[surrogate]\nepochs = 2\nepoch = 3\n", &msg), 3u);
  EXPECT_NE(msg.find("surrogate.epoch"), std::string::npos);
  EXPECT_EQ(parse_error_line("[nope]\n"), 1u);
  EXPECT_EQ(parse_error_line("seed = 1\n"), 1u);
}

TEST(Config, MalformedLines) {
  EXPECT_EQ(parse_error_line("[run]\nseed\n"), 2u);
  EXPECT_EQ(parse_error_line("[run\n"), 1u);
  EXPECT_EQ(parse_error_line("[run]\nseed = abc\n"), 2u);
  EXPECT_EQ(parse_error_line("[run]\nseed = -1\n"), 2u);
  EXPECT_EQ(parse_error_line("[surrogate]\nepochs = 2.5\n"), 2u);
  EXPECT_EQ(parse_error_line("[run]\nseed = 1\nseed = 2\n"), 3u);
}

TEST(Config, RangeValidation) {
  std::string msg;
  EXPECT_EQ(parse_error_line("[surrogate]\n\nepochs = -1\n", &msg), 3u);
  EXPECT_NE(msg.find("surrogate.epochs"), std::string::npos);
  EXPECT_EQ(parse_error_line("[surrogate]\nl1 = 1.5\n"), 2u);
  EXPECT_EQ(parse_error_line("[siamese]\nalpha = 1\n"), 2u);
  EXPECT_EQ(parse_error_line("[siamese]\nbatch_size = 1\n"), 2u);
  EXPECT_EQ(parse_error_line("[data]\nood_end = 500\n"), 2u);
  EXPECT_EQ(parse_error_line("[gradcheck]\ncoordinates = 8\n"), 2u);
  RunConfig c;
  c.siamese.model.epochs = -1;
  EXPECT_THROW(validate_config(c), ParseError);
}

TEST(Config, SerializeRoundTrip) {
  RunConfig c;
  c.seed = 7;
  c.surrogate.lipschitz.l1 = 0.6;
  c.siamese.model.ridge = 1.0 / 3.0;
  c.probe.max_increment = 0.1 + 0.2;
  const std::string text = serialize_config(c);
  const RunConfig back = parse_config(text);
  EXPECT_EQ(serialize_config(back), text);
  EXPECT_EQ(back.siamese.model.ridge, 1.0 / 3.0);
  EXPECT_EQ(back.probe.max_increment, 0.1 + 0.2);
  EXPECT_EQ(back.seed, 7u);
  EXPECT_NE(text.find("[surrogate]\n"), std::string::npos);
  EXPECT_NE(text.find("l1 = 0.6\n"), std::string::npos);
}

TEST(Config, LoadFromFile) {
  const auto dir = std::filesystem::temp_directory_path() / "dgpa_test_config";
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "run.ini");
    f << "[run]\nseed = 9\n";
  }
  EXPECT_EQ(load_config(dir / "run.ini").seed, 9u);
  EXPECT_THROW(load_config(dir / "missing.ini"), std::runtime_error);
}

}  // namespace
}  // namespace dgpa
