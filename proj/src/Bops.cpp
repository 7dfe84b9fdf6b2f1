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

#include "mixq/Bops.h"
#include "mixq/Error.h"

namespace mixq {

PrecisionConfig precisionConfigOf(const Graph &graph) {
  PrecisionConfig cfg;
  for (const auto &n : graph.nodes())
    if (isQuantizableKind(n.kind))
      cfg[n.id] = n.precision;
  return cfg;
}

int64_t countMacs(const Node &node,
                  const std::map<std::string, Shape> &shapes) {
  auto it = shapes.find(node.id);
  if (it == shapes.end())
    throw Error(ErrorCode::UnresolvedShape,
                "no resolved shape for '" + node.id + "'");
  int64_t outElems = numElements(it->second);
  switch (node.kind) {
  case NodeKind::Conv2d: {
    const auto &w = node.weight("weight").shape();
    return outElems * w[1] * w[2] * w[3];
  }
  case NodeKind::DepthwiseConv2d: {
    const auto &w = node.weight("weight").shape();
    return outElems * w[2] * w[3];
  }
  case NodeKind::Gemm: {
    const auto &w = node.weight("weight").shape();
    return outElems * w[1];
  }
  case NodeKind::BatchNorm:
  case NodeKind::ReLU:
  case NodeKind::Add:
  case NodeKind::MaxPool:
  case NodeKind::AvgPool:
  case NodeKind::GlobalAvgPool:
  case NodeKind::Softmax:
    return outElems;
  case NodeKind::Quantize:
  case NodeKind::Dequantize:
  case NodeKind::Flatten:
  case NodeKind::Input:
  case NodeKind::Output:
    return 0;
  }
  return 0;
}

BopsReport computeBops(const Graph &graph, const PrecisionConfig &config) {
  auto shapes = inferShapes(graph);
  BopsReport r;
  for (const auto &n : graph.nodes()) {
    int64_t macs = countMacs(n, shapes);
    r.macs[n.id] = macs;
    int bits = 32;
    if (isQuantizableKind(n.kind)) {
      auto it = config.find(n.id);
      if (it == config.end())
        throw Error(ErrorCode::IncompleteConfig,
                    "precision config does not cover '" + n.id + "'");
      if (it->second != 8 && it->second != 32)
        throw Error(ErrorCode::InvalidArgument,
                    "bit width of '" + n.id + "' must be 8 or 32");
      bits = it->second;
      r.bopsInt8 += 8 * macs;
    } else {
      r.bopsInt8 += 32 * macs;
    }
    r.bopsFp32 += 32 * macs;
    r.bopsConfig += int64_t(bits) * macs;
  }
  if (r.bopsFp32 > 0)
    r.literalReductionPct =
        100.0 * (1.0 - double(r.bopsConfig) / double(r.bopsFp32));
  if (r.bopsFp32 > r.bopsInt8)
    r.normalizedReductionPct = 100.0 * double(r.bopsFp32 - r.bopsConfig) /
                               double(r.bopsFp32 - r.bopsInt8);
  return r;
}

} // namespace mixq
