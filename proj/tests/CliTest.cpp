/**
 * Copyright (c) The mixq Authors.
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

// Drives the mixq binary end to end and checks exit codes and artifacts.

#include "mixq/Fusion.h"
#include "mixq/ModelIO.h"
#include "mixq/Quantizer.h"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sys/wait.h>

using namespace mixq;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string &name) {
  auto p = fs::temp_directory_path() / ("mixq_cli_" + name);
  fs::remove_all(p);
  return p;
}

int run(const std::string &args) {
  std::string cmd = std::string(MIXQ_BIN) + " " + args + " > /dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

const char *kSmall = " --num-calib 4 --num-eval 8";

} // namespace

TEST(Cli, UsageErrorsExitWithTwo) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("synth --no-such-flag"), 2);
  EXPECT_EQ(run("synth --work " + scratch("arch").string() + " --arch vgg"),
            2);
  EXPECT_EQ(run("quantize --target-reduction 120"), 2);
}

TEST(Cli, MissingPrerequisiteExitsWithThree) {
  auto w = scratch("missing").string();
  EXPECT_EQ(run("calibrate --work " + w), 3);
  ASSERT_EQ(run("synth --work " + w + kSmall), 0);
  EXPECT_EQ(run("analyze --work " + w), 3);
  ASSERT_EQ(run("calibrate --work " + w), 0);
  EXPECT_EQ(run("quantize --work " + w), 3);
  EXPECT_EQ(run("evaluate --work " + w), 3);
}

TEST(Cli, RecalibrationInvalidatesAnalysis) {
  auto w = scratch("stale").string();
  ASSERT_EQ(run("synth --work " + w + kSmall), 0);
  ASSERT_EQ(run("calibrate --work " + w), 0);
  ASSERT_EQ(run("analyze --work " + w), 0);
  ASSERT_EQ(run("quantize --work " + w), 0);
  ASSERT_EQ(run("calibrate --work " + w + " --bins 64"), 0);
  EXPECT_EQ(run("quantize --work " + w), 3);
}

TEST(Cli, CorruptModelExitsWithThree) {
  auto w = scratch("corrupt");
  ASSERT_EQ(run("synth --work " + w.string() + kSmall), 0);
  auto bin = w / "model" / "weights.bin";
  fs::resize_file(bin, fs::file_size(bin) / 2);
  EXPECT_EQ(run("calibrate --work " + w.string()), 3);
}

TEST(Cli, InOrderPipelineArtifacts) {
  auto w = scratch("inorder");
  ASSERT_EQ(run("pipeline --work " + w.string() + kSmall +
                " --method in-order --target-reduction 0,100"),
            0);
  Graph g = loadModel((w / "model").string());
  std::vector<std::string> expected;
  for (const auto &grp : discoverFusionGroups(g))
    expected.insert(expected.end(), grp.members.begin(), grp.members.end());
  auto methodDir = w / "methods" / "in_order";
  EXPECT_EQ(loadNodeList((methodDir / "sensitivity.txt").string()), expected);
  EXPECT_TRUE(
      loadNodeList((methodDir / "targets" / "100" / "dequant.txt").string())
          .empty());
  EXPECT_FALSE(
      loadNodeList((methodDir / "targets" / "0" / "dequant.txt").string())
          .empty());
  for (const char *f : {"report.json", "recovery_curve.csv", "calib.json",
                        "run_config.json"})
    EXPECT_TRUE(fs::exists(w / f)) << f;
}

TEST(Cli, RerunningAStageIsIdempotent) {
  auto w = scratch("idem");
  auto ws = w.string();
  ASSERT_EQ(run("pipeline --work " + ws + kSmall), 0);
  auto target = w / "methods" / "quantune_v2" / "targets" / "40";
  auto manifest = slurp(target / "model" / "manifest.json");
  auto weights = slurp(target / "model" / "weights.bin");
  auto report = slurp(w / "report.json");
  ASSERT_EQ(run("quantize --work " + ws), 0);
  ASSERT_EQ(run("evaluate --work " + ws), 0);
  ASSERT_EQ(run("report --work " + ws), 0);
  EXPECT_EQ(slurp(target / "model" / "manifest.json"), manifest);
  EXPECT_EQ(slurp(target / "model" / "weights.bin"), weights);
  EXPECT_EQ(slurp(w / "report.json"), report);
}
