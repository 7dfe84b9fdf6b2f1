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

#include "mixq/QuantMath.h"
#include "mixq/Error.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mixq {

int64_t roundHalfAway(double x) {
  constexpr double lim = 9.0e18;
  if (std::isnan(x))
    return 0;
  if (x >= lim)
    return std::numeric_limits<int64_t>::max();
  if (x <= -lim)
    return std::numeric_limits<int64_t>::min();
  // std::llround rounds halfway cases away from zero regardless of the
  // current floating-point rounding mode.
  return std::llround(x);
}

int32_t quantizeValue(double x, const QuantParams &qp) {
  int64_t q = roundHalfAway(x / qp.step);
  // Saturating add; q may be at the int64 limits.
  if (q > int64_t(qp.qmax()) - qp.zeroPoint)
    return qp.qmax();
  if (q < int64_t(qp.qmin()) - qp.zeroPoint)
    return qp.qmin();
  return int32_t(q + qp.zeroPoint);
}

Tensor quantizeAffine(const Tensor &x, const QuantParams &qp) {
  qp.validate();
  auto src = x.f32();
  if (qp.bitWidth == 8) {
    std::vector<int8_t> out(src.size());
    for (size_t i = 0; i < src.size(); ++i)
      out[i] = int8_t(quantizeValue(src[i], qp));
    return Tensor::i8(x.shape(), std::move(out), qp);
  }
  std::vector<int32_t> out(src.size());
  for (size_t i = 0; i < src.size(); ++i)
    out[i] = quantizeValue(src[i], qp);
  return Tensor::i32(x.shape(), std::move(out), qp);
}

Tensor dequantize(const Tensor &q, const QuantParams &qp) {
  std::vector<float> out(size_t(q.size()));
  if (q.dtype() == DType::I8) {
    auto src = q.i8();
    for (size_t i = 0; i < src.size(); ++i)
      out[i] = float(dequantizeValue(src[i], qp));
  } else if (q.dtype() == DType::I32) {
    auto src = q.i32();
    for (size_t i = 0; i < src.size(); ++i)
      out[i] = float(dequantizeValue(src[i], qp));
  } else {
    throw Error(ErrorCode::InvalidArgument, "dequantize expects an int tensor");
  }
  return Tensor::f32(q.shape(), std::move(out));
}

Tensor dequantize(const Tensor &q) {
  if (q.dtype() == DType::F32)
    return q;
  if (!q.qparams())
    throw Error(ErrorCode::MissingQuantParams,
                "integer tensor without quantization parameters");
  return dequantize(q, *q.qparams());
}

Tensor fakeQuantize(const Tensor &x, const QuantParams &qp) {
  return dequantize(quantizeAffine(x, qp), qp);
}

} // namespace mixq
