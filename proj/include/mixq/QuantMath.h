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
#ifndef MIXQ_QUANTMATH_H
#define MIXQ_QUANTMATH_H

#include "mixq/Tensor.h"

#include <cstdint>

namespace mixq {

/// Round half away from zero (2.5 -> 3, -2.5 -> -3), saturated to int64.
int64_t roundHalfAway(double x);

/// clamp(round(x / step) + zeroPoint) into the code range of \p qp.
int32_t quantizeValue(double x, const QuantParams &qp);

/// (q - zeroPoint) * step.
inline double dequantizeValue(int32_t q, const QuantParams &qp) {
  return double(q - qp.zeroPoint) * qp.step;
}

/// Affine quantization of an F32 tensor. 8-bit params produce I8, 32-bit
/// params produce I32.
Tensor quantizeAffine(const Tensor &x, const QuantParams &qp);

/// Dequantizes an I8/I32 tensor with explicit parameters.
Tensor dequantize(const Tensor &q, const QuantParams &qp);
/// Dequantizes with the tensor's own parameters; F32 passes through.
Tensor dequantize(const Tensor &q);

/// Quantize-then-dequantize in one step (the value the int8 path "sees").
Tensor fakeQuantize(const Tensor &x, const QuantParams &qp);

} // namespace mixq

#endif // MIXQ_QUANTMATH_H
