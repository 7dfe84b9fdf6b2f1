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
#include "mixq/Kernels.h"
#include "mixq/QuantMath.h"

#include <gtest/gtest.h>

#include <cmath>

using namespace mixq;
using namespace mixq::testing;

namespace {

void expectValues(const Tensor &t, std::vector<float> want, double tol = 0) {
  ASSERT_EQ(size_t(t.size()), want.size());
  for (size_t i = 0; i < want.size(); ++i)
    EXPECT_NEAR(t.f32()[i], want[i], tol) << "element " << i;
}

// Naive 7-loop convolution used as an independent oracle.
std::vector<double> naiveConv(const Tensor &x, const Tensor &w,
                              const Tensor *b, int64_t stride, int64_t pad) {
  const auto &xs = x.shape();
  const auto &ws = w.shape();
  int64_t ho = (xs[2] + 2 * pad - ws[2]) / stride + 1;
  int64_t wo = (xs[3] + 2 * pad - ws[3]) / stride + 1;
  std::vector<double> out;
  for (int64_t co = 0; co < ws[0]; ++co)
    for (int64_t oy = 0; oy < ho; ++oy)
      for (int64_t ox = 0; ox < wo; ++ox) {
        double acc = b ? b->f32()[size_t(co)] : 0.0;
        for (int64_t ci = 0; ci < ws[1]; ++ci)
          for (int64_t ky = 0; ky < ws[2]; ++ky)
            for (int64_t kx = 0; kx < ws[3]; ++kx) {
              int64_t iy = oy * stride - pad + ky, ix = ox * stride - pad + kx;
              if (iy < 0 || ix < 0 || iy >= xs[2] || ix >= xs[3])
                continue;
              acc += double(x.f32()[size_t((ci * xs[2] + iy) * xs[3] + ix)]) *
                     double(w.f32()[size_t(((co * ws[1] + ci) * ws[2] + ky) *
                                               ws[3] +
                                           kx)]);
            }
        out.push_back(acc);
      }
  return out;
}

} // namespace

TEST(Kernels, IdentityConv) {
  auto x = Tensor::f32({1, 1, 2, 2}, {1, -2, 3, 4});
  auto w = Tensor::f32({1, 1, 1, 1}, {1});
  auto b = Tensor::f32({1}, {0});
  expectValues(kernels::conv2d(x, w, &b, 1, 0), {1, -2, 3, 4});
}

TEST(Kernels, AllOnesConv) {
  auto x = Tensor::f32({1, 1, 2, 2}, {1, 2, 3, 4});
  auto w = Tensor::f32({1, 1, 2, 2}, {1, 1, 1, 1});
  expectValues(kernels::conv2d(x, w, nullptr, 1, 0), {10});
}

TEST(Kernels, ConvMatchesNaiveOracle) {
  Rng rng(21);
  for (int64_t stride : {1, 2})
    for (int64_t pad : {0, 1}) {
      auto x = randomTensor({1, 3, 7, 6}, rng);
      auto w = randomTensor({4, 3, 3, 3}, rng);
      auto b = randomTensor({4}, rng);
      auto got = kernels::conv2d(x, w, &b, stride, pad);
      auto want = naiveConv(x, w, &b, stride, pad);
      ASSERT_EQ(size_t(got.size()), want.size());
      for (size_t i = 0; i < want.size(); ++i)
        EXPECT_NEAR(got.f32()[i], want[i], 1e-4);
    }
}

TEST(Kernels, DepthwiseMatchesPerChannelConv) {
  Rng rng(22);
  auto x = randomTensor({1, 3, 5, 5}, rng);
  auto w = randomTensor({3, 1, 3, 3}, rng);
  auto got = kernels::depthwiseConv2d(x, w, nullptr, 1, 1);
  for (int64_t c = 0; c < 3; ++c) {
    std::vector<float> xc(x.f32().begin() + c * 25,
                          x.f32().begin() + (c + 1) * 25);
    std::vector<float> wc(w.f32().begin() + c * 9,
                          w.f32().begin() + (c + 1) * 9);
    auto want = naiveConv(Tensor::f32({1, 1, 5, 5}, xc),
                          Tensor::f32({1, 1, 3, 3}, wc), nullptr, 1, 1);
    for (size_t i = 0; i < want.size(); ++i)
      EXPECT_NEAR(got.f32()[size_t(c) * 25 + i], want[i], 1e-5);
  }
}

TEST(Kernels, BatchNormExamples) {
  auto one = vec({1.0f});
  auto zero = vec({0.0f});
  auto x = Tensor::f32({1, 1, 1, 2}, {3, -1});
  expectValues(kernels::batchNorm(x, one, zero, zero, one, 0.0), {3, -1});
  auto y = kernels::batchNorm(Tensor::f32({1, 1, 1, 1}, {3}), vec({2}),
                              vec({0.5}), vec({1}), vec({4}), 0.0);
  expectValues(y, {2.5f});
}

TEST(Kernels, BatchNormRejectsNegativeVariance) {
  auto one = vec({1.0f});
  try {
    kernels::batchNorm(Tensor::f32({1, 1, 1, 1}, {1}), one, one, one,
                       vec({-1.0f}), 0.0);
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::NonPositiveVariance);
  }
}

TEST(Kernels, MiscExamples) {
  expectValues(kernels::relu(vec({-3, 0, 5})), {0, 0, 5});
  expectValues(kernels::maxPool(Tensor::f32({1, 1, 2, 2}, {1, 2, 3, 4}), 2, 2,
                                0),
               {4});
  expectValues(kernels::avgPool(Tensor::f32({1, 1, 2, 2}, {1, 2, 3, 4}), 2, 2,
                                0),
               {2.5});
  auto w = Tensor::f32({2, 2}, {1, 0, 0, 1});
  auto b = vec({1, 1});
  expectValues(kernels::gemm(Tensor::f32({1, 2}, {1, 2}), w, &b), {2, 3});
  expectValues(kernels::softmax(Tensor::f32({1, 2}, {0, 0})), {0.5, 0.5});
  expectValues(kernels::add(vec({1, 2}), vec({3, -4})), {4, -2});
}

TEST(Kernels, GlobalAvgPoolNonSquare) {
  auto x = Tensor::f32({1, 1, 2, 3}, {1, 2, 3, 4, 5, 6});
  expectValues(kernels::globalAvgPool(x), {3.5}, 1e-6);
}

TEST(Kernels, ShapeErrors) {
  EXPECT_THROW(kernels::add(vec({1, 2}), vec({1, 2, 3})), Error);
  auto x = Tensor::f32({1, 2, 2, 2}, std::vector<float>(8, 1.0f));
  auto w = Tensor::f32({1, 3, 1, 1}, {1, 1, 1});
  EXPECT_THROW(kernels::conv2d(x, w, nullptr, 1, 0), Error);
}

TEST(Kernels, Int8ConvHandExample) {
  QuantParams unit{8, 1.0, 0, true};
  auto x = Tensor::i8({1, 1, 1, 1}, {2}, unit);
  auto w = Tensor::i8({1, 1, 1, 1}, {3}, unit);
  auto y = kernels::conv2dInt8(x, w, nullptr, 1, 0, false, unit, false);
  EXPECT_EQ(y.i8()[0], 6);
}

TEST(Kernels, Int8FusedReluClampsAtZero) {
  // y = [-3, 0.5] with S_a = 0.5 gives [0, 1].
  QuantParams sx{8, 0.5, 0, true}, sw{8, 1.0, 0, true}, sa{8, 0.5, 0, true};
  auto x = Tensor::i8({1, 1, 1, 2}, {-6, 1}, sx);
  auto w = Tensor::i8({1, 1, 1, 1}, {1}, sw);
  auto y = kernels::conv2dInt8(x, w, nullptr, 1, 0, false, sa, true);
  EXPECT_EQ(y.i8()[0], 0);
  EXPECT_EQ(y.i8()[1], 1);
  auto neg = Tensor::i8({1, 1, 1, 2}, {-6, -1}, sx);
  auto z = kernels::conv2dInt8(neg, w, nullptr, 1, 0, false, sa, true);
  EXPECT_EQ(z.i8()[0], 0);
  EXPECT_EQ(z.i8()[1], 0);
}

TEST(Kernels, Int8ConvTracksFakeQuantReference) {
  Rng rng(23);
  auto xf = randomTensor({1, 2, 5, 5}, rng);
  auto wf = randomTensor({3, 2, 3, 3}, rng, 0.3);
  auto bf = randomTensor({3}, rng, 0.1);
  QuantParams xq{8, 4.0 / 127, 0, false};
  auto wq = weightQParams(wf);
  QuantParams bq{32, xq.step * wq.step, 0, true};
  auto ref = kernels::conv2d(fakeQuantize(xf, xq), fakeQuantize(wf, wq),
                             &bf, 1, 1);
  double maxAbs = 0;
  for (float v : ref.f32())
    maxAbs = std::max(maxAbs, double(std::abs(v)));
  QuantParams yq{8, maxAbs / 127, 0, true};
  auto bias = quantizeAffine(bf, bq);
  auto y = kernels::conv2dInt8(quantizeAffine(xf, xq), quantizeAffine(wf, wq),
                               &bias, 1, 1, false, yq, false);
  auto yd = dequantize(y);
  for (size_t i = 0; i < size_t(ref.size()); ++i)
    EXPECT_NEAR(yd.f32()[i], ref.f32()[i], yq.step / 2 + bq.step);
}

TEST(Kernels, Int8BiasMustUseAccumulatorScale) {
  QuantParams unit{8, 1.0, 0, true};
  auto x = Tensor::i8({1, 1, 1, 1}, {2}, unit);
  auto w = Tensor::i8({1, 1, 1, 1}, {3}, unit);
  auto bias = Tensor::i32({1}, {1}, QuantParams{32, 0.5, 0, true});
  EXPECT_THROW(
      kernels::conv2dInt8(x, w, &bias, 1, 0, false, unit, false), Error);
}
