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

#include "mixq/Executor.h"
#include "mixq/Error.h"
#include "mixq/Kernels.h"
#include "mixq/QuantMath.h"

#include <unordered_map>

namespace mixq {

namespace {

const Tensor &expectF32(const Node &n, const Tensor &t) {
  if (t.dtype() != DType::F32)
    throw Error(ErrorCode::InvalidGraph,
                "FP32 node '" + n.id +
                    "' received an integer tensor (missing Dequantize)");
  return t;
}

const Tensor &expectI8(const Node &n, const Tensor &t) {
  if (t.dtype() != DType::I8 || !t.qparams())
    throw Error(ErrorCode::MissingQuantParams,
                "int8 node '" + n.id +
                    "' received a tensor without int8 quantization");
  return t;
}

Tensor runFloatNode(const Node &n, const std::vector<const Tensor *> &in) {
  auto x = [&](size_t i) -> const Tensor & { return expectF32(n, *in[i]); };
  bool fusedRelu = n.intAttr("fused_relu", 0) != 0;
  switch (n.kind) {
  case NodeKind::Conv2d:
    return kernels::conv2d(x(0), n.weight("weight"), n.findWeight("bias"),
                           n.intAttr("stride", 1), n.intAttr("pad", 0),
                           fusedRelu);
  case NodeKind::DepthwiseConv2d:
    return kernels::depthwiseConv2d(x(0), n.weight("weight"),
                                    n.findWeight("bias"),
                                    n.intAttr("stride", 1),
                                    n.intAttr("pad", 0), fusedRelu);
  case NodeKind::BatchNorm:
    return kernels::batchNorm(x(0), n.weight("gamma"), n.weight("beta"),
                              n.weight("mean"), n.weight("var"),
                              n.floatAttr("epsilon"));
  case NodeKind::ReLU:
    return kernels::relu(x(0));
  case NodeKind::Add:
    return kernels::add(x(0), x(1));
  case NodeKind::MaxPool: {
    auto k = n.intAttr("kernel");
    return kernels::maxPool(x(0), k, n.intAttr("stride", k),
                            n.intAttr("pad", 0));
  }
  case NodeKind::AvgPool: {
    auto k = n.intAttr("kernel");
    return kernels::avgPool(x(0), k, n.intAttr("stride", k),
                            n.intAttr("pad", 0));
  }
  case NodeKind::GlobalAvgPool:
    return kernels::globalAvgPool(x(0));
  case NodeKind::Gemm:
    return kernels::gemm(x(0), n.weight("weight"), n.findWeight("bias"));
  case NodeKind::Flatten:
    return kernels::flatten(x(0));
  case NodeKind::Softmax:
    return kernels::softmax(x(0));
  default:
    throw Error(ErrorCode::UnsupportedKind,
                std::string("no FP32 kernel for ") + kindName(n.kind));
  }
}

Tensor runInt8Node(const Node &n, const std::vector<const Tensor *> &in) {
  if (!n.outputQuant)
    throw Error(ErrorCode::MissingQuantParams,
                "int8 node '" + n.id + "' has no output parameters");
  const auto &out = *n.outputQuant;
  auto x = [&](size_t i) -> const Tensor & { return expectI8(n, *in[i]); };
  bool fusedRelu = n.intAttr("fused_relu", 0) != 0;
  switch (n.kind) {
  case NodeKind::Conv2d:
  case NodeKind::DepthwiseConv2d:
    return kernels::conv2dInt8(
        x(0), n.weight("weight"), n.findWeight("bias"), n.intAttr("stride", 1),
        n.intAttr("pad", 0), n.kind == NodeKind::DepthwiseConv2d, out,
        fusedRelu);
  case NodeKind::Gemm:
    return kernels::gemmInt8(x(0), n.weight("weight"), n.findWeight("bias"),
                             out);
  case NodeKind::BatchNorm:
    return kernels::batchNormInt8(x(0), n.weight("gamma"), n.weight("beta"),
                                  n.weight("mean"), n.weight("var"),
                                  n.floatAttr("epsilon"), out);
  case NodeKind::ReLU:
    return kernels::reluInt8(x(0), out);
  case NodeKind::Add:
    return kernels::addInt8(x(0), x(1), out);
  case NodeKind::MaxPool: {
    auto k = n.intAttr("kernel");
    return kernels::maxPoolInt8(x(0), k, n.intAttr("stride", k),
                                n.intAttr("pad", 0), out);
  }
  case NodeKind::AvgPool: {
    auto k = n.intAttr("kernel");
    return kernels::avgPoolInt8(x(0), k, n.intAttr("stride", k),
                                n.intAttr("pad", 0), out);
  }
  case NodeKind::GlobalAvgPool:
    return kernels::globalAvgPoolInt8(x(0), out);
  default:
    throw Error(ErrorCode::UnsupportedKind,
                std::string("no int8 kernel for ") + kindName(n.kind));
  }
}

} // namespace

RunResult Executor::runFp32(const Graph &graph, const Tensor &input,
                            bool capture) {
  return run(graph, input, capture, false);
}

RunResult Executor::runQuantized(const Graph &graph, const Tensor &input,
                                 bool capture) {
  return run(graph, input, capture, true);
}

RunResult Executor::run(const Graph &graph, const Tensor &input, bool capture,
                        bool allowInt8) {
  std::unordered_map<std::string, Tensor> values;
  RunResult result;
  for (const auto &id : topoSort(graph)) {
    const auto &n = graph.node(id);
    if (!allowInt8 && (n.precision != 32 || n.kind == NodeKind::Quantize ||
                       n.kind == NodeKind::Dequantize))
      throw Error(ErrorCode::UnsupportedKind,
                  "FP32 execution of quantized node '" + id + "'");
    std::vector<const Tensor *> in;
    for (const auto &src : n.inputs)
      in.push_back(&values.at(src));

    Tensor out;
    switch (n.kind) {
    case NodeKind::Input: {
      auto expected = n.intsAttr("shape");
      if (input.shape() != expected)
        throw Error(ErrorCode::ShapeMismatch,
                    "input shape " + shapeToString(input.shape()) +
                        " does not match " + shapeToString(expected));
      out = expectF32(n, input);
      break;
    }
    case NodeKind::Output:
      out = dequantize(*in[0]);
      break;
    case NodeKind::Quantize:
      out = quantizeAffine(expectF32(n, *in[0]), *n.outputQuant);
      break;
    case NodeKind::Dequantize:
      out = dequantize(expectI8(n, *in[0]));
      break;
    default:
      out = n.precision == 8 ? runInt8Node(n, in) : runFloatNode(n, in);
      break;
    }
    if (capture)
      result.trace.outputs[id] = dequantize(out);
    if (n.kind == NodeKind::Output)
      result.output = out;
    values[id] = std::move(out);
  }
  result.trace.passCounter = ++passes_;
  return result;
}

std::string logitNodeId(const Graph &graph) {
  std::string id = graph.outputNode().inputs.at(0);
  for (;;) {
    const auto &n = graph.node(id);
    if (n.kind == NodeKind::Softmax || n.kind == NodeKind::Quantize ||
        n.kind == NodeKind::Dequantize || n.kind == NodeKind::Flatten)
      id = n.inputs.at(0);
    else
      return id;
  }
}

} // namespace mixq
