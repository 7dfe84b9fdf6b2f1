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

#include "mixq/Synthetic.h"
#include "mixq/Error.h"
#include "mixq/Sensitivity.h"

#include <cmath>
#include <numbers>
#include <set>

namespace mixq {

double Rng::normal() {
  // 1 - u keeps the log argument in (0, 1].
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

namespace {

constexpr int64_t kClasses = 10;

/// Appends layers to a graph while tracking the current tensor id.
class Builder {
public:
  Builder(std::string name, uint64_t seed, Shape inputShape)
      : g_(std::move(name)), rng_(seed) {
    Node in("input", NodeKind::Input);
    in.attrs["shape"] = inputShape;
    g_.addNode(std::move(in));
  }

  Graph &graph() { return g_; }

  std::string conv(const std::string &id, const std::string &from,
                   int64_t cin, int64_t cout, int64_t k, int64_t stride,
                   bool depthwise = false) {
    Node n(id, depthwise ? NodeKind::DepthwiseConv2d : NodeKind::Conv2d,
           {from});
    n.attrs["stride"] = stride;
    n.attrs["pad"] = k / 2;
    int64_t fanIn = (depthwise ? 1 : cin) * k * k;
    Shape ws{cout, depthwise ? 1 : cin, k, k};
    n.weights["weight"] = normalTensor(ws, std::sqrt(2.0 / double(fanIn)));
    n.weights["bias"] = normalTensor({cout}, 0.05);
    g_.addNode(std::move(n));
    return id;
  }

  std::string bn(const std::string &id, const std::string &from, int64_t c) {
    Node n(id, NodeKind::BatchNorm, {from});
    std::vector<float> gamma, beta, mean, var;
    for (int64_t i = 0; i < c; ++i) {
      gamma.push_back(float(1.0 + 0.1 * rng_.normal()));
      beta.push_back(float(0.1 * rng_.normal()));
      mean.push_back(float(0.1 * rng_.normal()));
      var.push_back(float(0.5 + rng_.uniform()));
    }
    n.weights["gamma"] = Tensor::f32({c}, gamma);
    n.weights["beta"] = Tensor::f32({c}, beta);
    n.weights["mean"] = Tensor::f32({c}, mean);
    n.weights["var"] = Tensor::f32({c}, var);
    n.attrs["epsilon"] = 1e-5;
    g_.addNode(std::move(n));
    return id;
  }

  std::string unary(const std::string &id, NodeKind kind,
                    const std::string &from) {
    g_.addNode(Node(id, kind, {from}));
    return id;
  }

  std::string add(const std::string &id, const std::string &main,
                  const std::string &skip) {
    g_.addNode(Node(id, NodeKind::Add, {main, skip}));
    return id;
  }

  std::string maxPool(const std::string &id, const std::string &from,
                      int64_t k) {
    Node n(id, NodeKind::MaxPool, {from});
    n.attrs["kernel"] = k;
    n.attrs["stride"] = k;
    g_.addNode(std::move(n));
    return id;
  }

  /// conv + bn + relu.
  std::string block(const std::string &suffix, const std::string &from,
                    int64_t cin, int64_t cout, int64_t k, int64_t stride,
                    bool depthwise = false) {
    std::string c = conv((depthwise ? "dw" : "conv") + suffix, from, cin, cout,
                         k, stride, depthwise);
    std::string b = bn("bn" + suffix, c, cout);
    return unary("relu" + suffix, NodeKind::ReLU, b);
  }

  /// GlobalAvgPool, Gemm to the class count, Softmax, Output.
  void head(const std::string &from, int64_t c) {
    std::string gap = unary("gap", NodeKind::GlobalAvgPool, from);
    Node fc("fc", NodeKind::Gemm, {gap});
    fc.weights["weight"] =
        normalTensor({kClasses, c}, std::sqrt(1.0 / double(c)));
    fc.weights["bias"] = normalTensor({kClasses}, 0.05);
    g_.addNode(std::move(fc));
    unary("softmax", NodeKind::Softmax, "fc");
    unary("output", NodeKind::Output, "softmax");
  }

private:
  Tensor normalTensor(Shape shape, double stddev) {
    std::vector<float> v(size_t(numElements(shape)));
    for (auto &x : v)
      x = float(stddev * rng_.normal());
    return Tensor::f32(std::move(shape), std::move(v));
  }

  Graph g_;
  Rng rng_;
};

Graph mininet(uint64_t seed) {
  Builder b("mininet", seed, {1, 3, 16, 16});
  std::string x = b.block("1", "input", 3, 8, 3, 1);
  x = b.block("2", x, 8, 8, 3, 1);
  x = b.block("3", x, 8, 16, 3, 2);
  std::string skip = b.block("4", x, 16, 16, 3, 1);
  // Block 5 adds the block-4 output between its BatchNorm and ReLU.
  std::string c5 = b.conv("conv5", skip, 16, 16, 3, 1);
  std::string n5 = b.bn("bn5", c5, 16);
  std::string a5 = b.add("add5", n5, skip);
  x = b.unary("relu5", NodeKind::ReLU, a5);
  x = b.block("6", x, 16, 32, 3, 2);
  x = b.block("7", x, 32, 32, 3, 1);
  x = b.block("8", x, 32, 32, 3, 1);
  b.head(x, 32);
  return std::move(b.graph());
}

Graph miniResnet(uint64_t seed) {
  Builder b("mini_resnet", seed, {1, 3, 16, 16});
  std::string x = b.block("_stem", "input", 3, 16, 3, 1);
  x = b.maxPool("pool", x, 2);

  auto residual = [&](const std::string &name, const std::string &in,
                      int64_t cin, int64_t cout, int64_t stride) {
    std::string a = b.block(name + "a", in, cin, cout, 3, stride);
    std::string c = b.conv("conv" + name + "b", a, cout, cout, 3, 1);
    std::string n = b.bn("bn" + name + "b", c, cout);
    std::string skip = in;
    if (stride != 1 || cin != cout) {
      std::string p = b.conv("conv" + name + "p", in, cin, cout, 1, stride);
      skip = b.bn("bn" + name + "p", p, cout);
    }
    std::string s = b.add("add" + name, n, skip);
    return b.unary("relu" + name, NodeKind::ReLU, s);
  };
  x = residual("1", x, 16, 16, 1);
  x = residual("2", x, 16, 32, 2);
  x = residual("3", x, 32, 32, 1);
  b.head(x, 32);
  return std::move(b.graph());
}

Graph miniMobilenet(uint64_t seed) {
  Builder b("mini_mobilenet", seed, {1, 3, 16, 16});
  std::string x = b.block("_stem", "input", 3, 16, 3, 1);

  auto separable = [&](const std::string &name, const std::string &in,
                       int64_t cin, int64_t cout, int64_t stride,
                       bool residual) {
    std::string d = b.block(name, in, cin, cin, 3, stride, true);
    std::string c = b.conv("pw" + name, d, cin, cout, 1, 1);
    std::string n = b.bn("bnpw" + name, c, cout);
    if (residual)
      n = b.add("add" + name, n, in);
    return b.unary("relupw" + name, NodeKind::ReLU, n);
  };
  x = separable("1", x, 16, 24, 1, false);
  x = separable("2", x, 24, 32, 2, false);
  x = separable("3", x, 32, 32, 1, true);
  x = separable("4", x, 32, 64, 2, false);
  b.head(x, 64);
  return std::move(b.graph());
}

} // namespace

std::vector<std::string> syntheticArchs() {
  return {"mininet", "mini_resnet", "mini_mobilenet"};
}

Graph genSynthetic(const std::string &arch, uint64_t seed) {
  Graph g;
  if (arch == "mininet")
    g = mininet(seed);
  else if (arch == "mini_resnet")
    g = miniResnet(seed);
  else if (arch == "mini_mobilenet")
    g = miniMobilenet(seed);
  else
    throw Error(ErrorCode::UnknownArch, "unknown architecture '" + arch + "'");
  g.validate();
  return g;
}

std::vector<Tensor> genImages(const Graph &graph, size_t count,
                              uint64_t seed) {
  Shape shape = graph.inputNode().intsAttr("shape");
  Rng rng(seed);
  std::vector<Tensor> images;
  for (size_t i = 0; i < count; ++i) {
    std::vector<float> v(size_t(numElements(shape)));
    for (auto &x : v)
      x = float(rng.normal());
    images.push_back(Tensor::f32(shape, std::move(v)));
  }
  return images;
}

Graph injectWeightPathology(const Graph &graph, const std::string &nodeId,
                            double factor, double fraction, uint64_t seed) {
  const Node *n = graph.find(nodeId);
  if (!n)
    throw Error(ErrorCode::UnknownNode, "no node '" + nodeId + "'");
  if (!hasWeightTensor(n->kind))
    throw Error(ErrorCode::InvalidArgument,
                "'" + nodeId + "' has no weight tensor");
  Graph g = graph;
  Tensor &w = g.mutableNode(nodeId).weights.at("weight");
  auto data = w.f32();
  size_t count = std::max<size_t>(1, size_t(fraction * double(data.size())));
  Rng rng(seed);
  std::set<size_t> picked;
  while (picked.size() < std::min(count, data.size()))
    picked.insert(size_t(rng.below(data.size())));
  for (size_t i : picked)
    data[i] = float(double(data[i]) * factor);
  return g;
}

std::vector<int64_t> teacherLabels(Executor &exec, const Graph &graph,
                                   const std::vector<Tensor> &images) {
  std::vector<int64_t> labels;
  for (const auto &img : images)
    labels.push_back(argmax(exec.runFp32(graph, img).output));
  return labels;
}

} // namespace mixq
