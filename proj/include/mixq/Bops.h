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
#ifndef MIXQ_BOPS_H
#define MIXQ_BOPS_H

#include "mixq/Graph.h"

#include <cstdint>
#include <map>
#include <string>

namespace mixq {

/// Layer id -> bit width (8 or 32) for every quantizable node.
using PrecisionConfig = std::map<std::string, int>;

/// \returns the precision config currently encoded in the nodes of \p graph.
PrecisionConfig precisionConfigOf(const Graph &graph);

/// Multiply-accumulates of one node given resolved output shapes.
///   conv:  out_elems * kh * kw * C_in / groups
///   gemm:  M * N * K
///   bn, relu, add, pools, softmax: out_elems
///   quantize, dequantize, flatten, input, output: 0
int64_t countMacs(const Node &node, const std::map<std::string, Shape> &shapes);

struct BopsReport {
  std::map<std::string, int64_t> macs;
  int64_t bopsFp32{0};
  int64_t bopsInt8{0};
  int64_t bopsConfig{0};
  /// (1 - BOPs(config) / BOPs_fp32) * 100; caps at 75 for 8/32 mixes.
  double literalReductionPct{0.0};
  /// 0 = FP32 model, 100 = every quantizable node at 8 bits.
  double normalizedReductionPct{0.0};
};

/// BOPs = sum bits(node) * MAC(node). Nodes outside \p config count at 32
/// bits; every quantizable node must be covered (IncompleteConfig).
BopsReport computeBops(const Graph &graph, const PrecisionConfig &config);

} // namespace mixq

#endif // MIXQ_BOPS_H
