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
#ifndef MIXQ_KERNELS_H
#define MIXQ_KERNELS_H

#include "mixq/Tensor.h"

namespace mixq {
namespace kernels {

// Reference FP32 kernels. Activations are NCHW; conv weights are
// [Cout, Cin, kh, kw] ([C, 1, kh, kw] for depthwise). Loops run in a fixed
// order so results are bit-reproducible.

Tensor conv2d(const Tensor &x, const Tensor &w, const Tensor *bias,
              int64_t stride, int64_t pad, bool fusedRelu = false);
Tensor depthwiseConv2d(const Tensor &x, const Tensor &w, const Tensor *bias,
                       int64_t stride, int64_t pad, bool fusedRelu = false);
/// gamma * (x - mean) / sqrt(var + eps) + beta per channel.
Tensor batchNorm(const Tensor &x, const Tensor &gamma, const Tensor &beta,
                 const Tensor &mean, const Tensor &var, double eps);
Tensor relu(const Tensor &x);
Tensor add(const Tensor &a, const Tensor &b);
/// Padding cells do not participate in the max / average.
Tensor maxPool(const Tensor &x, int64_t kernel, int64_t stride, int64_t pad);
Tensor avgPool(const Tensor &x, int64_t kernel, int64_t stride, int64_t pad);
Tensor globalAvgPool(const Tensor &x);
/// x W^T + b with x flattened to [N, K] and W of shape [M, K].
Tensor gemm(const Tensor &x, const Tensor &w, const Tensor *bias);
Tensor flatten(const Tensor &x);
/// Row-wise softmax over the flattened trailing dimensions, max-subtracted.
Tensor softmax(const Tensor &x);

// Integer kernels. Inputs are I8 with their own QuantParams; weights are
// symmetric I8; biases are I32 with step = S_x * S_w. Products accumulate in
// int32 and the result is requantized once into \p out:
//   y_i8 = clamp(round(S_x S_w / S_y * acc) + zp_y).

Tensor conv2dInt8(const Tensor &x, const Tensor &w, const Tensor *bias,
                  int64_t stride, int64_t pad, bool depthwise,
                  const QuantParams &out, bool fusedRelu);
Tensor gemmInt8(const Tensor &x, const Tensor &w, const Tensor *bias,
                const QuantParams &out);
Tensor batchNormInt8(const Tensor &x, const Tensor &gamma, const Tensor &beta,
                     const Tensor &mean, const Tensor &var, double eps,
                     const QuantParams &out);
Tensor reluInt8(const Tensor &x, const QuantParams &out);
Tensor addInt8(const Tensor &a, const Tensor &b, const QuantParams &out);
Tensor maxPoolInt8(const Tensor &x, int64_t kernel, int64_t stride,
                   int64_t pad, const QuantParams &out);
Tensor avgPoolInt8(const Tensor &x, int64_t kernel, int64_t stride,
                   int64_t pad, const QuantParams &out);
Tensor globalAvgPoolInt8(const Tensor &x, const QuantParams &out);

} // namespace kernels
} // namespace mixq

#endif // MIXQ_KERNELS_H
