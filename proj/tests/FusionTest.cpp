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
#include "mixq/Metrics.h"

#include <gtest/gtest.h>

using namespace mixq;
using namespace mixq::testing;

namespace {

Node bnWith(const std::string &id, const std::string &from, float gamma,
            float beta, float mean, float var) {
  Node n(id, NodeKind::BatchNorm, {from});
  n.weights["gamma"] = vec({gamma});
  n.weights["beta"] = vec({beta});
  n.weights["mean"] = vec({mean});
  n.weights["var"] = vec({var});
  n.attrs["epsilon"] = 0.0;
  return n;
}

Graph convBn(float gamma, float beta, float mean, float var) {
  Graph g("cb");
  g.addNode(input({1, 1, 3, 3}));
  Node c("c", NodeKind::Conv2d, {"input"});
  c.weights["weight"] = Tensor::f32({1, 1, 1, 1}, {0.75f});
  c.weights["bias"] = vec({1.0f});
  g.addNode(c);
  g.addNode(bnWith("b", "c", gamma, beta, mean, var));
  g.addNode(output("b"));
  return g;
}

std::vector<size_t> groupSizes(const Graph &g) {
  std::vector<size_t> sizes;
  for (const auto &grp : discoverFusionGroups(g))
    sizes.push_back(grp.members.size());
  return sizes;
}

} // namespace

TEST(Fusion, IdentityBatchNormLeavesWeights) {
  Graph f = fuseConvBn(convBn(1, 0, 0, 1));
  ASSERT_FALSE(f.contains("b"));
  EXPECT_EQ(f.node("c").weight("weight").f32()[0], 0.75f);
  EXPECT_EQ(f.node("c").weight("bias").f32()[0], 1.0f);
}

TEST(Fusion, FoldedWeightsHandExample) {
  // gamma / sqrt(var) = 1, so A = W and C = (1 - 1) + 0.5.
  Graph f = fuseConvBn(convBn(2, 0.5f, 1, 4));
  EXPECT_EQ(f.node("c").weight("weight").f32()[0], 0.75f);
  EXPECT_FLOAT_EQ(f.node("c").weight("bias").f32()[0], 0.5f);
  EXPECT_EQ(f.node("c").outputAlias(), "b");
}

TEST(Fusion, ConvBnReluIsOneGroup) {
  Graph g = convBnReluPair();
  auto groups = discoverFusionGroups(g);
  ASSERT_EQ(groups.size(), 2u);
  EXPECT_EQ(groups[0].anchor, "c1");
  EXPECT_EQ(groups[0].members,
            (std::vector<std::string>{"c1", "b1", "r1"}));
}

TEST(Fusion, MixedPatternsGiveGroupsOf321) {
  Rng rng(3);
  Graph g("mixed");
  g.addNode(input({1, 2, 5, 5}));
  g.addNode(conv("c1", "input", 2, 3, 3, rng));
  g.addNode(bn("b1", "c1", 3, rng));
  g.addNode(relu("r1", "b1"));
  g.addNode(conv("c2", "r1", 3, 3, 3, rng));
  g.addNode(relu("r2", "c2"));
  g.addNode(conv("c3", "r2", 3, 2, 1, rng));
  g.addNode(output("c3"));
  EXPECT_EQ(groupSizes(g), (std::vector<size_t>{3, 2, 1}));
}

TEST(Fusion, ResidualAddJoinsMainChain) {
  Rng rng(4);
  Graph g("res");
  g.addNode(input({1, 2, 5, 5}));
  g.addNode(conv("c1", "input", 2, 2, 3, rng));
  g.addNode(bn("b1", "c1", 2, rng));
  g.addNode(Node("add", NodeKind::Add, {"b1", "input"}));
  g.addNode(relu("r", "add"));
  g.addNode(output("r"));
  EXPECT_EQ(groupSizes(g), (std::vector<size_t>{4}));
}

TEST(Fusion, MininetGroupsPartitionQuantizableNodes) {
  Graph g = genSynthetic("mininet", 42);
  auto groups = discoverFusionGroups(g);
  size_t members = 0, quantizable = 0;
  for (const auto &grp : groups)
    members += grp.members.size();
  for (const auto &n : g.nodes())
    quantizable += isQuantizableKind(n.kind);
  EXPECT_EQ(members, quantizable);
  // 8 conv chains, GlobalAvgPool and Gemm.
  EXPECT_EQ(groups.size(), 10u);
  EXPECT_EQ(groups[4].members,
            (std::vector<std::string>{"conv5", "bn5", "add5", "relu5"}));
}

TEST(Fusion, StageAIsIdentity) {
  Graph g = genSynthetic("mini_resnet", 1);
  EXPECT_TRUE(lowerToStage(g, IrStage::Unfused).structurallyEqual(g));
}

TEST(Fusion, StageCCollapsesConvBnRelu) {
  Graph g = convBnReluPair();
  Graph c = lowerToStage(g, IrStage::Fused);
  EXPECT_EQ(c.size(), 4u); // input, c1, c2, output
  EXPECT_TRUE(c.node("c1").intAttr("fused_relu", 0));
  EXPECT_EQ(c.node("c1").outputAlias(), "r1");
  GroupIndex index(c);
  EXPECT_EQ(index.hostOf("b2"), "c2");
  EXPECT_EQ(index.find("r1"), index.find("c1"));

  Executor exec;
  for (const auto &x : genImages(g, 5, 9)) {
    auto a = exec.runFp32(g, x).output;
    auto b = exec.runFp32(c, x).output;
    for (size_t i = 0; i < size_t(a.size()); ++i)
      EXPECT_NEAR(a.f32()[i], b.f32()[i], 1e-4);
  }
}

TEST(Fusion, StageCMatchesStageAOnAllArchs) {
  Executor exec;
  for (const auto &arch : syntheticArchs()) {
    Graph a = genSynthetic(arch, 42);
    Graph c = lowerToStage(a, IrStage::Fused);
    EXPECT_LT(c.size(), a.size()) << arch;
    for (const auto &x : genImages(a, 4, 17)) {
      auto ya = exec.runFp32(a, x).output;
      auto yc = exec.runFp32(c, x).output;
      EXPECT_GT(sqnr(ya, yc), 80.0) << arch;
    }
  }
}

TEST(Fusion, StageNames) {
  EXPECT_EQ(irStageFromName("fused"), IrStage::Fused);
  EXPECT_EQ(irStageFromName("C"), IrStage::Fused);
  EXPECT_EQ(irStageFromName("unfused"), IrStage::Unfused);
  EXPECT_STREQ(irStageName(IrStage::Unfused), "unfused");
  EXPECT_THROW(irStageFromName("B"), Error);
}
