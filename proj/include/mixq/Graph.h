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
#ifndef MIXQ_GRAPH_H
#define MIXQ_GRAPH_H

#include "mixq/Tensor.h"

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

namespace mixq {

enum class NodeKind {
  Input,
  Output,
  Conv2d,
  DepthwiseConv2d,
  BatchNorm,
  ReLU,
  Add,
  MaxPool,
  AvgPool,
  GlobalAvgPool,
  Gemm,
  Flatten,
  Softmax,
  Quantize,
  Dequantize,
};

const char *kindName(NodeKind kind);
NodeKind kindFromName(const std::string &name);

/// Kinds that have an int8 counterpart. Softmax, Flatten, Input and Output
/// always stay in FP32.
bool isQuantizableKind(NodeKind kind);
/// Conv2d, DepthwiseConv2d and Gemm: the kinds with a quantizable weight.
bool hasWeightTensor(NodeKind kind);
bool isConvKind(NodeKind kind);

using AttrValue =
    std::variant<int64_t, double, std::string, std::vector<int64_t>,
                 std::vector<double>, std::vector<std::string>>;
using Attrs = std::map<std::string, AttrValue>;

/// One operator of the IR. Nodes are plain values; the owning Graph enforces
/// id uniqueness and edge resolution.
struct Node {
  std::string id;
  NodeKind kind{NodeKind::Input};
  Attrs attrs;
  std::vector<std::string> inputs;
  std::map<std::string, Tensor> weights;
  /// 32 until a transform lowers the node to int8.
  int precision{32};
  /// Output quantization of an int8 node or a Quantize adapter.
  std::optional<QuantParams> outputQuant;

  Node() = default;
  Node(std::string id, NodeKind kind, std::vector<std::string> inputs = {})
      : id(std::move(id)), kind(kind), inputs(std::move(inputs)) {}

  bool hasAttr(const std::string &name) const { return attrs.count(name); }
  int64_t intAttr(const std::string &name) const;
  int64_t intAttr(const std::string &name, int64_t dflt) const;
  double floatAttr(const std::string &name) const;
  double floatAttr(const std::string &name, double dflt) const;
  std::string strAttr(const std::string &name,
                      const std::string &dflt = "") const;
  std::vector<int64_t> intsAttr(const std::string &name) const;
  std::vector<std::string> strsAttr(const std::string &name) const;

  const Tensor &weight(const std::string &name) const;
  const Tensor *findWeight(const std::string &name) const;

  /// Ids of the original nodes this node now stands for (itself plus
  /// anything folded into it by fusion).
  std::vector<std::string> representedIds() const;
  /// Id of the node whose activation this node's output equals; differs from
  /// `id` after fusion folded a BatchNorm/ReLU into a conv.
  std::string outputAlias() const;
};

class Graph {
public:
  explicit Graph(std::string name = "graph") : name_(std::move(name)) {}

  const std::string &name() const { return name_; }
  const std::vector<Node> &nodes() const { return nodes_; }
  size_t size() const { return nodes_.size(); }

  /// Appends \p node; throws InvalidGraph on duplicate id.
  Node &addNode(Node node);
  bool contains(const std::string &id) const { return index_.count(id); }
  const Node &node(const std::string &id) const;
  Node &mutableNode(const std::string &id);
  const Node *find(const std::string &id) const;
  /// Insertion position of \p id.
  size_t position(const std::string &id) const;

  void removeNode(const std::string &id);
  /// Rewrites every input edge reading \p from to read \p to instead.
  void redirectUses(const std::string &from, const std::string &to);

  /// Consumers of each node id, in node order (one entry per edge).
  std::unordered_map<std::string, std::vector<std::string>> consumers() const;

  const Node &inputNode() const;
  const Node &outputNode() const;

  /// Checks unique ids, resolvable edges, exactly one Input/Output, per-kind
  /// attributes and acyclicity. Throws InvalidGraph / CycleDetected.
  void validate() const;

  /// Structural equality including bit-exact weights.
  bool structurallyEqual(const Graph &other) const;

private:
  void reindex();

  std::string name_;
  std::vector<Node> nodes_;
  std::unordered_map<std::string, size_t> index_;
};

/// Kahn's algorithm; among ready nodes the earliest inserted goes first.
std::vector<std::string> topoSort(const Graph &graph);

/// \returns a copy of \p graph with \p oldId replaced by \p newNode and every
/// consumer rewired. Throws UnknownNode or ShapeMismatch.
Graph replaceNode(const Graph &graph, const std::string &oldId, Node newNode);

/// Dead-code and common-subexpression elimination, plus removal of
/// Quantize(Dequantize(x)) pairs that round-trip x's own parameters.
/// Runs to a fixpoint.
Graph dceCse(const Graph &graph);

/// Output shape per node id. Throws ShapeMismatch / UnresolvedShape.
std::map<std::string, Shape> inferShapes(const Graph &graph);

/// Stable digest of a node's kind, attrs, inputs, weights, precision and
/// quantization; two nodes are CSE-equivalent iff their keys match.
std::string nodeContentKey(const Node &node);

} // namespace mixq

#endif // MIXQ_GRAPH_H
