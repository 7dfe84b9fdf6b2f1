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

#include "TestGraphs.h"

#include "mixq/Error.h"
#include "mixq/Fusion.h"
#include "mixq/Quantizer.h"

#include <gtest/gtest.h>

#include <filesystem>

using namespace mixq;
using namespace mixq::testing;

namespace {

int countKind(const Graph &g, NodeKind kind) {
  int n = 0;
  for (const auto &node : g.nodes())
    n += node.kind == kind;
  return n;
}

ErrorCode codeOf(const std::function<void()> &fn) {
  try {
    fn();
  } catch (const Error &e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::InvalidArgument;
}

} // namespace

TEST(Quantizer, ChainKeepingLastConv) {
  Graph g = chainC1R1C2();
  Graph q = applyMixedPrecision(g, {"c2"}, calibrate(g));
  EXPECT_EQ(q.node("c1").precision, 8);
  EXPECT_EQ(q.node("r1").precision, 8);
  EXPECT_EQ(q.node("c2").precision, 32);
  EXPECT_EQ(countKind(q, NodeKind::Quantize), 1);
  EXPECT_EQ(countKind(q, NodeKind::Dequantize), 1);
  EXPECT_EQ(countQdq(q), 2);
  // Quantize reads the Input; the Dequantize feeds c2.
  const Node &c1 = q.node("c1");
  EXPECT_EQ(q.node(c1.inputs[0]).kind, NodeKind::Quantize);
  EXPECT_EQ(q.node(c1.inputs[0]).inputs[0], "input");
  EXPECT_EQ(q.node(q.node("c2").inputs[0]).kind, NodeKind::Dequantize);
  // Kept nodes stay bit-identical.
  EXPECT_TRUE(q.node("c2").weight("weight").bitEqual(
      g.node("c2").weight("weight")));
}

TEST(Quantizer, KeepingEverythingAddsNoAdapters) {
  Graph g = chainC1R1C2();
  Graph q = applyMixedPrecision(g, {"c1", "c2"}, calibrate(g));
  EXPECT_EQ(countQdq(q), 0);
  EXPECT_TRUE(q.structurallyEqual(g));
}

TEST(Quantizer, FullyInt8MininetHasTwoAdapters) {
  Graph g = genSynthetic("mininet", 42);
  auto calib = calibrate(g);
  for (auto stage : {IrStage::Unfused, IrStage::Fused}) {
    Graph q = applyMixedPrecision(lowerToStage(g, stage), {}, calib);
    EXPECT_EQ(countKind(q, NodeKind::Quantize), 1);
    EXPECT_EQ(countKind(q, NodeKind::Dequantize), 1);
    EXPECT_EQ(q.node("softmax").precision, 32);
    EXPECT_EQ(q.node(q.node("softmax").inputs[0]).kind,
              NodeKind::Dequantize);
  }
}

TEST(Quantizer, UntouchedGraphHasNoAdapters) {
  EXPECT_EQ(countQdq(genSynthetic("mininet", 42)), 0);
}

TEST(Quantizer, KeepingAMemberKeepsItsGroup) {
  Graph g = convBnReluPair();
  Graph q = applyMixedPrecision(g, {"b1"}, calibrate(g));
  for (const char *id : {"c1", "b1", "r1"})
    EXPECT_EQ(q.node(id).precision, 32) << id;
  for (const char *id : {"c2", "b2", "r2"})
    EXPECT_EQ(q.node(id).precision, 8) << id;
}

TEST(Quantizer, RejectsUnknownAndDuplicateIds) {
  Graph g = chainC1R1C2();
  auto calib = calibrate(g);
  EXPECT_EQ(codeOf([&] { applyMixedPrecision(g, {"nope"}, calib); }),
            ErrorCode::UnknownNodeInList);
  EXPECT_EQ(codeOf([&] { applyMixedPrecision(g, {"c1", "c1"}, calib); }),
            ErrorCode::InvalidArgument);
  EXPECT_EQ(codeOf([&] { applyMixedPrecision(g, {}, CalibrationProfile{}); }),
            ErrorCode::MissingCalibration);
}

TEST(Quantizer, FusedApplicationNeedsNoMoreAdapters) {
  for (const auto &arch : syntheticArchs()) {
    Graph g = genSynthetic(arch, 42);
    auto calib = calibrate(g, 4);
    GroupIndex index(g);
    // Keep every other group.
    DequantNodeList keep;
    for (size_t i = 0; i < index.groups().size(); i += 2)
      keep.push_back(index.groups()[i].anchor);
    int unfused = countQdq(applyMixedPrecision(g, keep, calib));
    int fused = countQdq(
        applyMixedPrecision(lowerToStage(g, IrStage::Fused), keep, calib));
    EXPECT_LE(fused, unfused) << arch;
  }
}

TEST(Quantizer, SelectDequantSetEndpoints) {
  Graph g = genSynthetic("mininet", 42);
  std::vector<std::string> list;
  for (const auto &grp : discoverFusionGroups(g))
    list.push_back(grp.anchor);
  EXPECT_TRUE(selectDequantSet(list, g, 100.0).empty());
  EXPECT_EQ(selectDequantSet(list, g, 0.0).size(), list.size());
  EXPECT_EQ(computeBops(g, configForKeepList(g, {})).normalizedReductionPct,
            100.0);
}

TEST(Quantizer, SelectDequantSetEqualMacs) {
  Graph g = gemmChain(3);
  // One of three equal groups kept: 100 * 2/3 = 66.67 <= 66.7.
  auto keep = selectDequantSet({"g2", "g1", "g3"}, g, 66.7);
  EXPECT_EQ(keep, std::vector<std::string>{"g2"});
}

TEST(Quantizer, ListFilesRoundTrip) {
  auto dir = std::filesystem::temp_directory_path();
  auto list = (dir / "mixq_list.txt").string();
  saveNodeList({"b", "a", "c"}, list);
  EXPECT_EQ(loadNodeList(list), (std::vector<std::string>{"b", "a", "c"}));
  auto cfgPath = (dir / "mixq_precision.json").string();
  PrecisionConfig cfg{{"a", 8}, {"b", 32}};
  savePrecisionConfig(cfg, cfgPath);
  EXPECT_EQ(loadPrecisionConfig(cfgPath), cfg);
}
