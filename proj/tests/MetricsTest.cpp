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
#include "mixq/Metrics.h"

#include <gtest/gtest.h>

#include <cmath>

using namespace mixq;
using namespace mixq::testing;

TEST(Metrics, SqnrSentinels) {
  auto a = vec({1, 2, 3});
  EXPECT_EQ(sqnr(a, a), 200.0);
  EXPECT_EQ(sqnr(vec({0, 0}), vec({1, 1})), -200.0);
}

TEST(Metrics, SqnrHandExample) {
  // Signal 14/3, noise 0.02/3 (float inputs, so compare loosely).
  EXPECT_NEAR(sqnr(vec({1, 2, 3}), vec({1.1f, 1.9f, 3.0f})), 28.45098, 1e-4);
}

TEST(Metrics, MseExamples) {
  auto a = vec({1, 2, 3});
  EXPECT_EQ(mse(a, a), 0.0);
  EXPECT_NEAR(mse(a, vec({1.1f, 1.9f, 3.0f})), 0.02 / 3, 1e-8);
  EXPECT_NEAR(mse(a, vec({1.5f, 2.5f, 3.5f})), 0.25, 1e-12);
}

TEST(Metrics, CosineExamples) {
  EXPECT_NEAR(cosineSimilarity(vec({1, 2}), vec({1, 2})), 1.0, 1e-12);
  EXPECT_EQ(cosineSimilarity(vec({1, 0}), vec({0, 1})), 0.0);
  EXPECT_EQ(cosineSimilarity(vec({1, 1}), vec({1, -1})), 0.0);
}

TEST(Metrics, KlExamples) {
  auto a = vec({0.1f, 0.7f, -2.0f, 3.0f});
  EXPECT_NEAR(klDivergence(a, a), 0.0, 1e-12);
  std::vector<double> p{0.5, 0.5}, q{0.9, 0.1};
  EXPECT_NEAR(klDivergence(p, q),
              0.5 * std::log(0.5 / 0.9) + 0.5 * std::log(0.5 / 0.1), 1e-8);
  EXPECT_NEAR(klDivergence(p, q), 0.5108, 1e-4);
}

TEST(Metrics, ShapeMismatch) {
  EXPECT_THROW(sqnr(vec({1, 2}), vec({1})), Error);
  EXPECT_THROW(mse(vec({1, 2}), vec({1})), Error);
  EXPECT_THROW(cosineSimilarity(vec({1, 2}), vec({1})), Error);
  EXPECT_THROW(klDivergence(vec({1, 2}), vec({1})), Error);
}

TEST(Metrics, SqnrDeltaExamples) {
  EXPECT_EQ(sqnrDelta({{0, 30}, {1, 25}, {2, 28}}),
            (std::vector<double>{0, -5, 3}));
  EXPECT_EQ(sqnrDelta({{0, 7}, {1, 7}, {2, 7}}),
            (std::vector<double>{0, 0, 0}));
  EXPECT_EQ(sqnrDelta({{0, 30}, {2, 26}}), (std::vector<double>{0, -2}));
}

TEST(Metrics, SqnrDeltaRejectsNonMonotonicIndices) {
  try {
    sqnrDelta({{0, 1}, {2, 1}, {2, 3}});
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::NonMonotonicIndices);
  }
}

TEST(Metrics, SqnrAndMseAgreeOnRanking) {
  // For a fixed reference, higher SQNR means lower MSE.
  Rng rng(8);
  auto ref = randomTensor({256}, rng);
  std::vector<std::pair<double, double>> pts;
  for (double s : {0.01, 0.1, 0.3, 1.0}) {
    auto noisy = ref;
    for (auto &v : noisy.f32())
      v = float(double(v) + s * rng.normal());
    pts.emplace_back(sqnr(ref, noisy), mse(ref, noisy));
  }
  for (size_t i = 1; i < pts.size(); ++i) {
    EXPECT_LT(pts[i].first, pts[i - 1].first);
    EXPECT_GT(pts[i].second, pts[i - 1].second);
  }
}
