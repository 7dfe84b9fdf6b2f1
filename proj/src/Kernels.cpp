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

#include "mixq/Kernels.h"
#include "mixq/Error.h"
#include "mixq/QuantMath.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mixq {
namespace kernels {

namespace {

[[noreturn]] void shapeError(const std::string &msg) {
  throw Error(ErrorCode::ShapeMismatch, msg);
}

void expectRank(const Tensor &t, size_t rank, const char *what) {
  if (t.shape().size() != rank)
    shapeError(std::string(what) + " expects rank " + std::to_string(rank) +
               ", got " + shapeToString(t.shape()));
}

const QuantParams &qp(const Tensor &t) {
  if (!t.qparams())
    throw Error(ErrorCode::MissingQuantParams,
                "integer operand without quantization parameters");
  return *t.qparams();
}

int8_t saturate8(int32_t v) { return int8_t(v); }

struct ConvGeom {
  int64_t n, cin, h, w, cout, kh, kw, oh, ow, stride, pad;
  bool depthwise;
};

ConvGeom convGeometry(const Tensor &x, const Tensor &w, int64_t stride,
                      int64_t pad, bool depthwise) {
  expectRank(x, 4, "conv input");
  expectRank(w, 4, "conv weight");
  if (stride <= 0 || pad < 0)
    shapeError("conv stride must be positive and pad non-negative");
  const auto &xs = x.shape();
  const auto &ws = w.shape();
  ConvGeom g{xs[0], xs[1], xs[2], xs[3], ws[0], ws[2], ws[3],
             0,     0,     stride, pad,  depthwise};
  if (depthwise) {
    if (ws[1] != 1 || ws[0] != xs[1])
      shapeError("depthwise weight " + shapeToString(ws) +
                 " does not match input channels " + std::to_string(xs[1]));
  } else if (ws[1] != xs[1]) {
    shapeError("conv weight " + shapeToString(ws) +
               " does not match input channels " + std::to_string(xs[1]));
  }
  g.oh = (g.h + 2 * pad - g.kh) / stride + 1;
  g.ow = (g.w + 2 * pad - g.kw) / stride + 1;
  if (g.oh <= 0 || g.ow <= 0)
    shapeError("conv kernel larger than padded input");
  return g;
}

/// Shared direct-convolution loop nest. \p mac is called for every in-bounds
/// (input index, weight index) pair of an output element; \p emit receives the
/// output index once the reduction is complete. Out-of-bounds taps are skipped,
/// which equals zero padding in the real domain.
template <typename Begin, typename Mac, typename Emit>
void convLoops(const ConvGeom &g, Begin begin, Mac mac, Emit emit) {
  int64_t cinPerGroup = g.depthwise ? 1 : g.cin;
  for (int64_t n = 0; n < g.n; ++n)
    for (int64_t co = 0; co < g.cout; ++co)
      for (int64_t oy = 0; oy < g.oh; ++oy)
        for (int64_t ox = 0; ox < g.ow; ++ox) {
          begin(co);
          for (int64_t ci = 0; ci < cinPerGroup; ++ci) {
            int64_t xc = g.depthwise ? co : ci;
            for (int64_t ky = 0; ky < g.kh; ++ky) {
              int64_t iy = oy * g.stride - g.pad + ky;
              if (iy < 0 || iy >= g.h)
                continue;
              for (int64_t kx = 0; kx < g.kw; ++kx) {
                int64_t ix = ox * g.stride - g.pad + kx;
                if (ix < 0 || ix >= g.w)
                  continue;
                mac(((n * g.cin + xc) * g.h + iy) * g.w + ix,
                    ((co * cinPerGroup + ci) * g.kh + ky) * g.kw + kx);
              }
            }
          }
          emit(((n * g.cout + co) * g.oh + oy) * g.ow + ox);
        }
}

void checkBias(const Tensor *bias, int64_t cout) {
  if (bias && bias->shape() != Shape{cout})
    shapeError("bias length does not match output channels");
}

Tensor convF32(const Tensor &x, const Tensor &w, const Tensor *bias,
               int64_t stride, int64_t pad, bool depthwise, bool fusedRelu) {
  auto g = convGeometry(x, w, stride, pad, depthwise);
  checkBias(bias, g.cout);
  auto xd = x.f32();
  auto wd = w.f32();
  std::vector<float> out(size_t(g.n * g.cout * g.oh * g.ow));
  float acc = 0.0f;
  float b = 0.0f;
  convLoops(
      g,
      [&](int64_t co) {
        acc = 0.0f;
        b = bias ? bias->f32()[size_t(co)] : 0.0f;
      },
      [&](int64_t xi, int64_t wi) { acc += xd[size_t(xi)] * wd[size_t(wi)]; },
      [&](int64_t oi) {
        float v = acc + b;
        out[size_t(oi)] = fusedRelu ? std::max(v, 0.0f) : v;
      });
  return Tensor::f32({g.n, g.cout, g.oh, g.ow}, std::move(out));
}

Tensor convI8(const Tensor &x, const Tensor &w, const Tensor *bias,
              int64_t stride, int64_t pad, bool depthwise,
              const QuantParams &out, bool fusedRelu) {
  auto g = convGeometry(x, w, stride, pad, depthwise);
  checkBias(bias, g.cout);
  const auto &xq = qp(x);
  const auto &wq = qp(w);
  if (bias && (bias->dtype() != DType::I32 || !bias->qparams() ||
               bias->qparams()->step != xq.step * wq.step))
    throw Error(ErrorCode::MissingQuantParams,
                "int8 conv bias must be I32 with step S_x * S_w");
  auto xd = x.i8();
  auto wd = w.i8();
  const double scale = (xq.step * wq.step) / out.step;
  const int32_t zx = xq.zeroPoint;
  std::vector<int8_t> res(size_t(g.n * g.cout * g.oh * g.ow));
  int32_t acc = 0;
  convLoops(
      g, [&](int64_t co) { acc = bias ? bias->i32()[size_t(co)] : 0; },
      [&](int64_t xi, int64_t wi) {
        acc += (int32_t(xd[size_t(xi)]) - zx) * int32_t(wd[size_t(wi)]);
      },
      [&](int64_t oi) {
        int64_t r = roundHalfAway(scale * double(acc));
        if (fusedRelu)
          r = std::max<int64_t>(r, 0);
        r += out.zeroPoint;
        res[size_t(oi)] = saturate8(
            int32_t(std::clamp<int64_t>(r, out.qmin(), out.qmax())));
      });
  return Tensor::i8({g.n, g.cout, g.oh, g.ow}, std::move(res), out);
}

struct PoolGeom {
  int64_t n, c, h, w, oh, ow, k, stride, pad;
};

PoolGeom poolGeometry(const Tensor &x, int64_t k, int64_t stride,
                      int64_t pad) {
  expectRank(x, 4, "pool input");
  if (k <= 0 || stride <= 0 || pad < 0)
    shapeError("invalid pool window");
  const auto &s = x.shape();
  PoolGeom g{s[0], s[1], s[2], s[3], 0, 0, k, stride, pad};
  g.oh = (g.h + 2 * pad - k) / stride + 1;
  g.ow = (g.w + 2 * pad - k) / stride + 1;
  if (g.oh <= 0 || g.ow <= 0)
    shapeError("pool window larger than input");
  return g;
}

/// Visits every output cell; \p cell gets the list of in-bounds input indices.
template <typename Cell> void poolLoops(const PoolGeom &g, Cell cell) {
  std::vector<int64_t> taps;
  for (int64_t n = 0; n < g.n; ++n)
    for (int64_t c = 0; c < g.c; ++c)
      for (int64_t oy = 0; oy < g.oh; ++oy)
        for (int64_t ox = 0; ox < g.ow; ++ox) {
          taps.clear();
          for (int64_t ky = 0; ky < g.k; ++ky) {
            int64_t iy = oy * g.stride - g.pad + ky;
            if (iy < 0 || iy >= g.h)
              continue;
            for (int64_t kx = 0; kx < g.k; ++kx) {
              int64_t ix = ox * g.stride - g.pad + kx;
              if (ix >= 0 && ix < g.w)
                taps.push_back(((n * g.c + c) * g.h + iy) * g.w + ix);
            }
          }
          cell(((n * g.c + c) * g.oh + oy) * g.ow + ox, taps);
        }
}

void checkBnParams(const Tensor &x, const Tensor &gamma, const Tensor &beta,
                   const Tensor &mean, const Tensor &var, double eps) {
  if (x.shape().size() < 2)
    shapeError("batchnorm input needs a channel dimension");
  Shape ch{x.shape()[1]};
  if (gamma.shape() != ch || beta.shape() != ch || mean.shape() != ch ||
      var.shape() != ch)
    shapeError("batchnorm parameter length does not match channels");
  for (float v : var.f32())
    if (v < 0.0f || !(double(v) + eps > 0.0))
      throw Error(ErrorCode::NonPositiveVariance,
                  "batchnorm variance must be non-negative with var + eps > 0");
}

/// Per-channel (scale, shift) of a batchnorm: y = scale * x + shift.
void bnAffine(const Tensor &gamma, const Tensor &beta, const Tensor &mean,
              const Tensor &var, double eps, std::vector<double> &scale,
              std::vector<double> &shift) {
  auto g = gamma.f32(), b = beta.f32(), m = mean.f32(), v = var.f32();
  scale.resize(g.size());
  shift.resize(g.size());
  for (size_t c = 0; c < g.size(); ++c) {
    scale[c] = double(g[c]) / std::sqrt(double(v[c]) + eps);
    shift[c] = double(b[c]) - scale[c] * double(m[c]);
  }
}

int64_t innerSize(const Tensor &x) {
  const auto &s = x.shape();
  int64_t inner = 1;
  for (size_t i = 2; i < s.size(); ++i)
    inner *= s[i];
  return inner;
}

} // namespace

//===----------------------------------------------------------------------===//
// FP32
//===----------------------------------------------------------------------===//

Tensor conv2d(const Tensor &x, const Tensor &w, const Tensor *bias,
              int64_t stride, int64_t pad, bool fusedRelu) {
  return convF32(x, w, bias, stride, pad, false, fusedRelu);
}

Tensor depthwiseConv2d(const Tensor &x, const Tensor &w, const Tensor *bias,
                       int64_t stride, int64_t pad, bool fusedRelu) {
  return convF32(x, w, bias, stride, pad, true, fusedRelu);
}

Tensor batchNorm(const Tensor &x, const Tensor &gamma, const Tensor &beta,
                 const Tensor &mean, const Tensor &var, double eps) {
  checkBnParams(x, gamma, beta, mean, var, eps);
  auto xd = x.f32();
  auto g = gamma.f32(), b = beta.f32(), m = mean.f32(), v = var.f32();
  int64_t n = x.shape()[0], c = x.shape()[1], inner = innerSize(x);
  std::vector<float> out(xd.size());
  for (int64_t i = 0; i < n; ++i)
    for (int64_t ch = 0; ch < c; ++ch) {
      float denom = float(std::sqrt(double(v[size_t(ch)]) + eps));
      for (int64_t k = 0; k < inner; ++k) {
        size_t idx = size_t((i * c + ch) * inner + k);
        out[idx] =
            g[size_t(ch)] * ((xd[idx] - m[size_t(ch)]) / denom) + b[size_t(ch)];
      }
    }
  return Tensor::f32(x.shape(), std::move(out));
}

Tensor relu(const Tensor &x) {
  auto xd = x.f32();
  std::vector<float> out(xd.size());
  for (size_t i = 0; i < xd.size(); ++i)
    out[i] = std::max(xd[i], 0.0f);
  return Tensor::f32(x.shape(), std::move(out));
}

Tensor add(const Tensor &a, const Tensor &b) {
  if (a.shape() != b.shape())
    shapeError("add operands " + shapeToString(a.shape()) + " and " +
               shapeToString(b.shape()) + " differ");
  auto ad = a.f32(), bd = b.f32();
  std::vector<float> out(ad.size());
  for (size_t i = 0; i < ad.size(); ++i)
    out[i] = ad[i] + bd[i];
  return Tensor::f32(a.shape(), std::move(out));
}

Tensor maxPool(const Tensor &x, int64_t kernel, int64_t stride, int64_t pad) {
  auto g = poolGeometry(x, kernel, stride, pad);
  auto xd = x.f32();
  std::vector<float> out(size_t(g.n * g.c * g.oh * g.ow));
  poolLoops(g, [&](int64_t oi, const std::vector<int64_t> &taps) {
    float m = -std::numeric_limits<float>::infinity();
    for (auto t : taps)
      m = std::max(m, xd[size_t(t)]);
    out[size_t(oi)] = m;
  });
  return Tensor::f32({g.n, g.c, g.oh, g.ow}, std::move(out));
}

Tensor avgPool(const Tensor &x, int64_t kernel, int64_t stride, int64_t pad) {
  auto g = poolGeometry(x, kernel, stride, pad);
  auto xd = x.f32();
  std::vector<float> out(size_t(g.n * g.c * g.oh * g.ow));
  poolLoops(g, [&](int64_t oi, const std::vector<int64_t> &taps) {
    float s = 0.0f;
    for (auto t : taps)
      s += xd[size_t(t)];
    out[size_t(oi)] = s / float(taps.size());
  });
  return Tensor::f32({g.n, g.c, g.oh, g.ow}, std::move(out));
}

Tensor globalAvgPool(const Tensor &x) {
  expectRank(x, 4, "global pool input");
  const auto &s = x.shape();
  auto xd = x.f32();
  int64_t inner = s[2] * s[3];
  std::vector<float> out(size_t(s[0] * s[1]));
  for (int64_t i = 0; i < s[0] * s[1]; ++i) {
    float acc = 0.0f;
    for (int64_t k = 0; k < inner; ++k)
      acc += xd[size_t(i * inner + k)];
    out[size_t(i)] = acc / float(inner);
  }
  return Tensor::f32({s[0], s[1], 1, 1}, std::move(out));
}

Tensor gemm(const Tensor &x, const Tensor &w, const Tensor *bias) {
  expectRank(w, 2, "gemm weight");
  int64_t n = x.shape()[0], k = x.size() / n, m = w.shape()[0];
  if (w.shape()[1] != k)
    shapeError("gemm inner dimension " + std::to_string(k) +
               " does not match weight " + shapeToString(w.shape()));
  if (bias && bias->shape() != Shape{m})
    shapeError("gemm bias length mismatch");
  auto xd = x.f32(), wd = w.f32();
  std::vector<float> out(size_t(n * m));
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < m; ++j) {
      float acc = 0.0f;
      for (int64_t p = 0; p < k; ++p)
        acc += xd[size_t(i * k + p)] * wd[size_t(j * k + p)];
      out[size_t(i * m + j)] = acc + (bias ? bias->f32()[size_t(j)] : 0.0f);
    }
  return Tensor::f32({n, m}, std::move(out));
}

Tensor flatten(const Tensor &x) {
  int64_t n = x.shape()[0];
  return x.reshaped({n, x.size() / n});
}

Tensor softmax(const Tensor &x) {
  int64_t n = x.shape()[0], k = x.size() / n;
  auto xd = x.f32();
  std::vector<float> out(xd.size());
  for (int64_t i = 0; i < n; ++i) {
    float mx = -std::numeric_limits<float>::infinity();
    for (int64_t j = 0; j < k; ++j)
      mx = std::max(mx, xd[size_t(i * k + j)]);
    double sum = 0.0;
    for (int64_t j = 0; j < k; ++j)
      sum += std::exp(double(xd[size_t(i * k + j)] - mx));
    for (int64_t j = 0; j < k; ++j)
      out[size_t(i * k + j)] =
          float(std::exp(double(xd[size_t(i * k + j)] - mx)) / sum);
  }
  return Tensor::f32(x.shape(), std::move(out));
}

//===----------------------------------------------------------------------===//
// Int8
//===----------------------------------------------------------------------===//

Tensor conv2dInt8(const Tensor &x, const Tensor &w, const Tensor *bias,
                  int64_t stride, int64_t pad, bool depthwise,
                  const QuantParams &out, bool fusedRelu) {
  return convI8(x, w, bias, stride, pad, depthwise, out, fusedRelu);
}

Tensor gemmInt8(const Tensor &x, const Tensor &w, const Tensor *bias,
                const QuantParams &out) {
  expectRank(w, 2, "gemm weight");
  int64_t n = x.shape()[0], k = x.size() / n, m = w.shape()[0];
  if (w.shape()[1] != k)
    shapeError("gemm inner dimension mismatch");
  if (bias && bias->shape() != Shape{m})
    shapeError("gemm bias length mismatch");
  const auto &xq = qp(x);
  const auto &wq = qp(w);
  if (bias && (bias->dtype() != DType::I32 || !bias->qparams() ||
               bias->qparams()->step != xq.step * wq.step))
    throw Error(ErrorCode::MissingQuantParams,
                "int8 gemm bias must be I32 with step S_x * S_w");
  auto xd = x.i8(), wd = w.i8();
  const double scale = (xq.step * wq.step) / out.step;
  std::vector<int8_t> res(size_t(n * m));
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < m; ++j) {
      int32_t acc = bias ? bias->i32()[size_t(j)] : 0;
      for (int64_t p = 0; p < k; ++p)
        acc += (int32_t(xd[size_t(i * k + p)]) - xq.zeroPoint) *
               int32_t(wd[size_t(j * k + p)]);
      int64_t r = roundHalfAway(scale * double(acc)) + out.zeroPoint;
      res[size_t(i * m + j)] =
          saturate8(int32_t(std::clamp<int64_t>(r, out.qmin(), out.qmax())));
    }
  return Tensor::i8({n, m}, std::move(res), out);
}

Tensor batchNormInt8(const Tensor &x, const Tensor &gamma, const Tensor &beta,
                     const Tensor &mean, const Tensor &var, double eps,
                     const QuantParams &out) {
  checkBnParams(x, gamma, beta, mean, var, eps);
  std::vector<double> scale, shift;
  bnAffine(gamma, beta, mean, var, eps, scale, shift);
  const auto &xq = qp(x);
  auto xd = x.i8();
  int64_t n = x.shape()[0], c = x.shape()[1], inner = innerSize(x);
  std::vector<int8_t> res(xd.size());
  for (int64_t i = 0; i < n; ++i)
    for (int64_t ch = 0; ch < c; ++ch)
      for (int64_t k = 0; k < inner; ++k) {
        size_t idx = size_t((i * c + ch) * inner + k);
        double real = dequantizeValue(xd[idx], xq);
        res[idx] = saturate8(
            quantizeValue(scale[size_t(ch)] * real + shift[size_t(ch)], out));
      }
  return Tensor::i8(x.shape(), std::move(res), out);
}

Tensor reluInt8(const Tensor &x, const QuantParams &out) {
  const auto &xq = qp(x);
  auto xd = x.i8();
  std::vector<int8_t> res(xd.size());
  for (size_t i = 0; i < xd.size(); ++i) {
    double real = std::max(dequantizeValue(xd[i], xq), 0.0);
    res[i] = saturate8(quantizeValue(real, out));
  }
  return Tensor::i8(x.shape(), std::move(res), out);
}

Tensor addInt8(const Tensor &a, const Tensor &b, const QuantParams &out) {
  if (a.shape() != b.shape())
    shapeError("add operands differ in shape");
  const auto &aq = qp(a);
  const auto &bq = qp(b);
  auto ad = a.i8(), bd = b.i8();
  std::vector<int8_t> res(ad.size());
  for (size_t i = 0; i < ad.size(); ++i)
    res[i] = saturate8(quantizeValue(
        dequantizeValue(ad[i], aq) + dequantizeValue(bd[i], bq), out));
  return Tensor::i8(a.shape(), std::move(res), out);
}

Tensor maxPoolInt8(const Tensor &x, int64_t kernel, int64_t stride,
                   int64_t pad, const QuantParams &out) {
  auto g = poolGeometry(x, kernel, stride, pad);
  const auto &xq = qp(x);
  auto xd = x.i8();
  std::vector<int8_t> res(size_t(g.n * g.c * g.oh * g.ow));
  poolLoops(g, [&](int64_t oi, const std::vector<int64_t> &taps) {
    int32_t m = std::numeric_limits<int32_t>::min();
    for (auto t : taps)
      m = std::max<int32_t>(m, xd[size_t(t)]);
    res[size_t(oi)] = saturate8(quantizeValue(dequantizeValue(m, xq), out));
  });
  return Tensor::i8({g.n, g.c, g.oh, g.ow}, std::move(res), out);
}

Tensor avgPoolInt8(const Tensor &x, int64_t kernel, int64_t stride,
                   int64_t pad, const QuantParams &out) {
  auto g = poolGeometry(x, kernel, stride, pad);
  const auto &xq = qp(x);
  auto xd = x.i8();
  std::vector<int8_t> res(size_t(g.n * g.c * g.oh * g.ow));
  poolLoops(g, [&](int64_t oi, const std::vector<int64_t> &taps) {
    int32_t acc = 0;
    for (auto t : taps)
      acc += int32_t(xd[size_t(t)]) - xq.zeroPoint;
    double real = double(acc) * xq.step / double(taps.size());
    res[size_t(oi)] = saturate8(quantizeValue(real, out));
  });
  return Tensor::i8({g.n, g.c, g.oh, g.ow}, std::move(res), out);
}

Tensor globalAvgPoolInt8(const Tensor &x, const QuantParams &out) {
  expectRank(x, 4, "global pool input");
  const auto &s = x.shape();
  const auto &xq = qp(x);
  auto xd = x.i8();
  int64_t inner = s[2] * s[3];
  std::vector<int8_t> res(size_t(s[0] * s[1]));
  for (int64_t i = 0; i < s[0] * s[1]; ++i) {
    int32_t acc = 0;
    for (int64_t k = 0; k < inner; ++k)
      acc += int32_t(xd[size_t(i * inner + k)]) - xq.zeroPoint;
    res[size_t(i)] =
        saturate8(quantizeValue(double(acc) * xq.step / double(inner), out));
  }
  return Tensor::i8({s[0], s[1], 1, 1}, std::move(res), out);
}

} // namespace kernels
} // namespace mixq
