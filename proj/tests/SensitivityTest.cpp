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
#include "mixq/Sensitivity.h"

#include <gtest/gtest.h>

#include <algorithm>

using namespace mixq;
using namespace mixq::testing;

namespace {

using Ids = std::vector<std::string>;
using Values = std::map<std::string, double>;

Graph pathologyNet() {
  return injectWeightPathology(genSynthetic("mininet", 42), "conv7");
}

/// Gemm chain whose layers all compute the identity.
Graph identityChain(int layers) {
  Graph g("identity");
  g.addNode(input({1, 4}));
  std::string prev = "input";
  for (int i = 1; i <= layers; ++i) {
    Node n("g" + std::to_string(i), NodeKind::Gemm, {prev});
    std::vector<float> eye(16, 0.0f);
    for (int k = 0; k < 4; ++k)
      eye[size_t(k * 5)] = 1.0f;
    n.weights["weight"] = Tensor::f32({4, 4}, eye);
    prev = n.id;
    g.addNode(n);
  }
  g.addNode(output(prev));
  return g;
}

} // namespace

TEST(Sensitivity, RankThreeLayerExample) {
  Ids layers{"A", "B", "C"};
  Values d{{"A", 2.0}, {"B", -5.0}, {"C", 1.0}};
  Values m{{"A", 0.001}, {"B", 0.002}, {"C", 0.0015}};
  EXPECT_EQ(rankLayersBySensitivity(layers, d, d, m, 0.0015),
            (Ids{"B", "C", "A"}));
}

TEST(Sensitivity, RankSixLayerOracle) {
  Ids layers{"L1", "L2", "L3", "L4", "L5", "L6"};
  Values dw{{"L1", 0}, {"L2", -3}, {"L3", 1},
            {"L4", -1}, {"L5", 2}, {"L6", 0.5}};
  Values da{{"L1", 0}, {"L2", -1}, {"L3", -2},
            {"L4", 0.5}, {"L5", 3}, {"L6", 1}};
  Values m{{"L1", .01}, {"L2", .01}, {"L3", .01},
           {"L4", .01}, {"L5", .01}, {"L6", 1.0}};
  // Weight ranks L2 L4 L1 L6 L3 L5, activation ranks L3 L2 L1 L4 L6 L5.
  // Scores: L2 .4, L4 1.8, L1 2.0, L3 2.4, L6 3.4, L5 5.0; L6 > 5 * .175.
  EXPECT_EQ(rankLayersBySensitivity(layers, dw, da, m, 0.175),
            (Ids{"L6", "L2", "L4", "L1", "L3", "L5"}));
}

TEST(Sensitivity, EqualMseMeansNoPrepend) {
  Ids layers{"a", "b", "c"};
  Values d{{"a", 1}, {"b", 0}, {"c", -1}};
  Values m{{"a", 3}, {"b", 3}, {"c", 3}};
  EXPECT_EQ(rankLayersBySensitivity(layers, d, d, m, 3),
            (Ids{"c", "b", "a"}));
}

TEST(Sensitivity, TiesKeepTopologicalOrder) {
  Ids layers{"x", "y", "z"};
  Values zero{{"x", 0}, {"y", 0}, {"z", 0}};
  EXPECT_EQ(rankLayersBySensitivity(layers, zero, zero, zero, 0), layers);
}

TEST(Sensitivity, ScalingActivationDeltasKeepsOrder) {
  Rng rng(12);
  Ids layers;
  Values dw, da, da3, m;
  for (int i = 0; i < 12; ++i) {
    std::string id = "n" + std::to_string(i);
    layers.push_back(id);
    dw[id] = rng.normal();
    da[id] = rng.normal();
    da3[id] = 3.7 * da[id];
    m[id] = 1.0;
  }
  EXPECT_EQ(rankLayersBySensitivity(layers, dw, da, m, 1.0),
            rankLayersBySensitivity(layers, dw, da3, m, 1.0));
}

TEST(Sensitivity, KeyMismatch) {
  Ids layers{"a", "b"};
  Values full{{"a", 1}, {"b", 2}};
  Values partial{{"a", 1}};
  try {
    rankLayersBySensitivity(layers, full, partial, full, 1);
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::KeyMismatch);
  }
}

TEST(Sensitivity, TwoPassesPerImage) {
  Graph g = pathologyNet();
  auto images = genImages(g, 6, 1);
  Executor exec;
  auto calib = profileActivations(exec, g, images);
  exec.resetPassCount();
  auto r = generateSensitivityList(exec, g, calib, images);
  EXPECT_EQ(exec.passCount(), 2 * images.size());
  EXPECT_EQ(r.samples.size(), r.list.ids.size());
}

TEST(Sensitivity, PathologicalLayerRanksNearTop) {
  Graph g = pathologyNet();
  auto images = genImages(g, 8, 1);
  Executor exec;
  auto calib = profileActivations(exec, g, images);
  auto r = generateSensitivityList(exec, g, calib, images);
  auto pos = std::find(r.list.ids.begin(), r.list.ids.end(), "conv7") -
             r.list.ids.begin();
  EXPECT_LT(double(pos), 0.2 * double(r.list.ids.size()));
}

TEST(Sensitivity, ListCoversEveryGroupOnceWithMembersBehindAnchor) {
  Graph g = genSynthetic("mini_resnet", 2);
  auto images = genImages(g, 4, 1);
  Executor exec;
  auto r = generateSensitivityList(exec, g, profileActivations(exec, g, images),
                                   images);
  GroupIndex index(g);
  Ids sorted = r.list.ids;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(std::adjacent_find(sorted.begin(), sorted.end()), sorted.end());
  for (const auto &grp : index.groups()) {
    auto at = std::find(r.list.ids.begin(), r.list.ids.end(), grp.anchor);
    ASSERT_NE(at, r.list.ids.end());
    for (size_t k = 1; k < grp.members.size(); ++k)
      EXPECT_EQ(std::find(r.list.ids.begin(), r.list.ids.end(),
                          grp.members[k]) -
                    at,
                std::ptrdiff_t(k));
  }
}

TEST(Sensitivity, IdenticalLayersFollowTopologicalOrder) {
  Graph g = identityChain(4);
  auto images = genImages(g, 4, 3);
  Executor exec;
  auto r = generateSensitivityList(exec, g, profileActivations(exec, g, images),
                                   images);
  EXPECT_EQ(r.list.ids, (Ids{"g1", "g2", "g3", "g4"}));
}

TEST(Sensitivity, Deterministic) {
  Graph g = pathologyNet();
  auto images = genImages(g, 4, 1);
  Executor exec;
  auto calib = profileActivations(exec, g, images);
  auto a = generateSensitivityList(exec, g, calib, images).list;
  auto b = generateSensitivityList(exec, g, calib, images).list;
  EXPECT_EQ(a.ids, b.ids);
  EXPECT_EQ(a.calibrationDigest, b.calibrationDigest);
}

TEST(Sensitivity, EmptyImageBatch) {
  Graph g = chainC1R1C2();
  Executor exec;
  try {
    generateSensitivityList(exec, g, calibrate(g), {});
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyImageBatch);
  }
}

TEST(Sensitivity, InOrderBaseline) {
  Graph g = gemmChain(3);
  Executor exec;
  auto list = baselineOrder(exec, g, SensitivityMethod::InOrder, calibrate(g),
                            {});
  EXPECT_EQ(list.ids, (Ids{"g1", "g2", "g3"}));
  EXPECT_EQ(exec.passCount(), 0u);
}

TEST(Sensitivity, WeightSqnrBaselinePutsPathologyFirst) {
  Graph g = pathologyNet();
  Executor exec;
  auto list = baselineOrder(exec, g, SensitivityMethod::WeightSqnr,
                            calibrate(g, 2), {});
  EXPECT_EQ(list.ids.front(), "conv7");
  EXPECT_EQ(list.ids.back(), "gap");
}

TEST(Sensitivity, Top1BaselineCostAndLabels) {
  Graph g = gemmChain(3);
  auto calib = calibrate(g);
  auto images = genImages(g, 5, 2);
  Executor exec;
  auto labels = teacherLabels(exec, g, images);
  exec.resetPassCount();
  auto list = baselineOrder(exec, g, SensitivityMethod::Top1, calib, images,
                            &labels);
  EXPECT_EQ(exec.passCount(), (3u + 1u) * images.size());
  EXPECT_EQ(list.ids.size(), 3u);
  try {
    baselineOrder(exec, g, SensitivityMethod::Top1, calib, images, nullptr);
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingLabels);
  }
}

TEST(Sensitivity, MethodNames) {
  EXPECT_EQ(methodFromName("quantune-v2"), SensitivityMethod::QuantuneV2);
  EXPECT_EQ(methodFromName("weight_sqnr"), SensitivityMethod::WeightSqnr);
  EXPECT_STREQ(methodName(SensitivityMethod::InOrder), "in_order");
  EXPECT_THROW(methodFromName("random"), Error);
}
