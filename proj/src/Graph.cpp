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

#include "mixq/Graph.h"
#include "mixq/Digest.h"
#include "mixq/Error.h"

#include <algorithm>
#include <cstdio>
#include <queue>
#include <set>
#include <sstream>
#include <unordered_set>

namespace mixq {

namespace {
struct KindEntry {
  NodeKind kind;
  const char *name;
};
constexpr KindEntry kKinds[] = {
    {NodeKind::Input, "Input"},
    {NodeKind::Output, "Output"},
    {NodeKind::Conv2d, "Conv2d"},
    {NodeKind::DepthwiseConv2d, "DepthwiseConv2d"},
    {NodeKind::BatchNorm, "BatchNorm"},
    {NodeKind::ReLU, "ReLU"},
    {NodeKind::Add, "Add"},
    {NodeKind::MaxPool, "MaxPool"},
    {NodeKind::AvgPool, "AvgPool"},
    {NodeKind::GlobalAvgPool, "GlobalAvgPool"},
    {NodeKind::Gemm, "Gemm"},
    {NodeKind::Flatten, "Flatten"},
    {NodeKind::Softmax, "Softmax"},
    {NodeKind::Quantize, "Quantize"},
    {NodeKind::Dequantize, "Dequantize"},
};
} // namespace

const char *kindName(NodeKind kind) {
  for (const auto &e : kKinds)
    if (e.kind == kind)
      return e.name;
  return "?";
}

NodeKind kindFromName(const std::string &name) {
  for (const auto &e : kKinds)
    if (name == e.name)
      return e.kind;
  throw Error(ErrorCode::UnsupportedKind, "unknown node kind '" + name + "'");
}

bool isQuantizableKind(NodeKind kind) {
  switch (kind) {
  case NodeKind::Conv2d:
  case NodeKind::DepthwiseConv2d:
  case NodeKind::Gemm:
  case NodeKind::Add:
  case NodeKind::BatchNorm:
  case NodeKind::ReLU:
  case NodeKind::MaxPool:
  case NodeKind::AvgPool:
  case NodeKind::GlobalAvgPool:
    return true;
  default:
    return false;
  }
}

bool hasWeightTensor(NodeKind kind) {
  return kind == NodeKind::Conv2d || kind == NodeKind::DepthwiseConv2d ||
         kind == NodeKind::Gemm;
}

bool isConvKind(NodeKind kind) {
  return kind == NodeKind::Conv2d || kind == NodeKind::DepthwiseConv2d;
}

//===----------------------------------------------------------------------===//
// Node
//===----------------------------------------------------------------------===//

namespace {
template <typename T>
const T *attrAs(const Node &n, const std::string &name) {
  auto it = n.attrs.find(name);
  if (it == n.attrs.end())
    return nullptr;
  const T *v = std::get_if<T>(&it->second);
  if (!v)
    throw Error(ErrorCode::InvalidGraph, "attribute '" + name + "' of node '" +
                                             n.id + "' has the wrong type");
  return v;
}

[[noreturn]] void missingAttr(const Node &n, const std::string &name) {
  throw Error(ErrorCode::InvalidGraph,
              "node '" + n.id + "' lacks attribute '" + name + "'");
}
} // namespace

int64_t Node::intAttr(const std::string &name) const {
  if (auto *v = attrAs<int64_t>(*this, name))
    return *v;
  missingAttr(*this, name);
}

int64_t Node::intAttr(const std::string &name, int64_t dflt) const {
  auto *v = attrAs<int64_t>(*this, name);
  return v ? *v : dflt;
}

double Node::floatAttr(const std::string &name) const {
  if (auto *v = attrAs<double>(*this, name))
    return *v;
  missingAttr(*this, name);
}

double Node::floatAttr(const std::string &name, double dflt) const {
  auto *v = attrAs<double>(*this, name);
  return v ? *v : dflt;
}

std::string Node::strAttr(const std::string &name,
                          const std::string &dflt) const {
  auto *v = attrAs<std::string>(*this, name);
  return v ? *v : dflt;
}

std::vector<int64_t> Node::intsAttr(const std::string &name) const {
  if (auto *v = attrAs<std::vector<int64_t>>(*this, name))
    return *v;
  missingAttr(*this, name);
}

std::vector<std::string> Node::strsAttr(const std::string &name) const {
  auto *v = attrAs<std::vector<std::string>>(*this, name);
  return v ? *v : std::vector<std::string>{};
}

const Tensor &Node::weight(const std::string &name) const {
  auto it = weights.find(name);
  if (it == weights.end())
    throw Error(ErrorCode::InvalidGraph,
                "node '" + id + "' lacks weight '" + name + "'");
  return it->second;
}

const Tensor *Node::findWeight(const std::string &name) const {
  auto it = weights.find(name);
  return it == weights.end() ? nullptr : &it->second;
}

std::vector<std::string> Node::representedIds() const {
  std::vector<std::string> ids{id};
  for (auto &m : strsAttr("fused_members"))
    ids.push_back(m);
  return ids;
}

std::string Node::outputAlias() const { return strAttr("output_alias", id); }

//===----------------------------------------------------------------------===//
// Graph
//===----------------------------------------------------------------------===//

Node &Graph::addNode(Node node) {
  if (node.id.empty())
    throw Error(ErrorCode::InvalidGraph, "node id must not be empty");
  if (index_.count(node.id))
    throw Error(ErrorCode::InvalidGraph, "duplicate node id '" + node.id + "'");
  index_[node.id] = nodes_.size();
  nodes_.push_back(std::move(node));
  return nodes_.back();
}

const Node &Graph::node(const std::string &id) const {
  auto it = index_.find(id);
  if (it == index_.end())
    throw Error(ErrorCode::UnknownNode, "no node '" + id + "'");
  return nodes_[it->second];
}

Node &Graph::mutableNode(const std::string &id) {
  auto it = index_.find(id);
  if (it == index_.end())
    throw Error(ErrorCode::UnknownNode, "no node '" + id + "'");
  return nodes_[it->second];
}

const Node *Graph::find(const std::string &id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &nodes_[it->second];
}

size_t Graph::position(const std::string &id) const {
  auto it = index_.find(id);
  if (it == index_.end())
    throw Error(ErrorCode::UnknownNode, "no node '" + id + "'");
  return it->second;
}

void Graph::removeNode(const std::string &id) {
  auto pos = position(id);
  nodes_.erase(nodes_.begin() + long(pos));
  reindex();
}

void Graph::redirectUses(const std::string &from, const std::string &to) {
  for (auto &n : nodes_)
    for (auto &in : n.inputs)
      if (in == from)
        in = to;
}

void Graph::reindex() {
  index_.clear();
  for (size_t i = 0; i < nodes_.size(); ++i)
    index_[nodes_[i].id] = i;
}

std::unordered_map<std::string, std::vector<std::string>>
Graph::consumers() const {
  std::unordered_map<std::string, std::vector<std::string>> out;
  for (const auto &n : nodes_)
    for (const auto &in : n.inputs)
      out[in].push_back(n.id);
  return out;
}

const Node &Graph::inputNode() const {
  for (const auto &n : nodes_)
    if (n.kind == NodeKind::Input)
      return n;
  throw Error(ErrorCode::InvalidGraph, "graph has no Input node");
}

const Node &Graph::outputNode() const {
  for (const auto &n : nodes_)
    if (n.kind == NodeKind::Output)
      return n;
  throw Error(ErrorCode::InvalidGraph, "graph has no Output node");
}

namespace {
void expectInputs(const Node &n, size_t count) {
  if (n.inputs.size() != count)
    throw Error(ErrorCode::InvalidGraph,
                std::string(kindName(n.kind)) + " node '" + n.id +
                    "' expects " + std::to_string(count) + " input(s), has " +
                    std::to_string(n.inputs.size()));
}

void validateNode(const Node &n) {
  if (n.precision != 8 && n.precision != 32)
    throw Error(ErrorCode::InvalidGraph,
                "node '" + n.id + "' has precision " +
                    std::to_string(n.precision));
  switch (n.kind) {
  case NodeKind::Input:
    expectInputs(n, 0);
    n.intsAttr("shape");
    break;
  case NodeKind::Add:
    expectInputs(n, 2);
    break;
  case NodeKind::Conv2d:
  case NodeKind::DepthwiseConv2d:
  case NodeKind::Gemm: {
    expectInputs(n, 1);
    const auto &w = n.weight("weight");
    size_t rank = n.kind == NodeKind::Gemm ? 2 : 4;
    if (w.shape().size() != rank)
      throw Error(ErrorCode::InvalidGraph,
                  "node '" + n.id + "' weight must be rank " +
                      std::to_string(rank));
    if (n.kind == NodeKind::DepthwiseConv2d && w.shape()[1] != 1)
      throw Error(ErrorCode::InvalidGraph,
                  "depthwise weight must be [C,1,kh,kw] in '" + n.id + "'");
    if (auto *b = n.findWeight("bias"))
      if (b->shape() != Shape{w.shape()[0]})
        throw Error(ErrorCode::InvalidGraph,
                    "bias length mismatch in '" + n.id + "'");
    break;
  }
  case NodeKind::BatchNorm: {
    expectInputs(n, 1);
    const auto &g = n.weight("gamma");
    for (const char *p : {"beta", "mean", "var"})
      if (n.weight(p).shape() != g.shape() || g.shape().size() != 1)
        throw Error(ErrorCode::InvalidGraph,
                    "BatchNorm '" + n.id + "' parameter lengths differ");
    n.floatAttr("epsilon");
    break;
  }
  case NodeKind::MaxPool:
  case NodeKind::AvgPool:
    expectInputs(n, 1);
    n.intAttr("kernel");
    break;
  case NodeKind::Quantize:
    expectInputs(n, 1);
    if (!n.outputQuant)
      throw Error(ErrorCode::MissingQuantParams,
                  "Quantize '" + n.id + "' has no parameters");
    break;
  default:
    expectInputs(n, 1);
    break;
  }
}
} // namespace

void Graph::validate() const {
  size_t inputs = 0, outputs = 0;
  for (const auto &n : nodes_) {
    inputs += n.kind == NodeKind::Input;
    outputs += n.kind == NodeKind::Output;
    for (const auto &in : n.inputs)
      if (!contains(in))
        throw Error(ErrorCode::InvalidGraph,
                    "node '" + n.id + "' reads unknown node '" + in + "'");
    validateNode(n);
  }
  if (inputs != 1 || outputs != 1)
    throw Error(ErrorCode::InvalidGraph,
                "graph must have exactly one Input and one Output");
  topoSort(*this);
}

bool Graph::structurallyEqual(const Graph &other) const {
  if (nodes_.size() != other.nodes_.size())
    return false;
  for (size_t i = 0; i < nodes_.size(); ++i) {
    const auto &a = nodes_[i];
    const auto &b = other.nodes_[i];
    if (a.id != b.id || a.kind != b.kind || a.attrs != b.attrs ||
        a.inputs != b.inputs || a.precision != b.precision ||
        a.outputQuant != b.outputQuant || a.weights.size() != b.weights.size())
      return false;
    for (const auto &[name, t] : a.weights) {
      auto it = b.weights.find(name);
      if (it == b.weights.end() || !t.bitEqual(it->second))
        return false;
    }
  }
  return true;
}

//===----------------------------------------------------------------------===//
// Passes
//===----------------------------------------------------------------------===//

std::vector<std::string> topoSort(const Graph &graph) {
  const auto &nodes = graph.nodes();
  std::vector<size_t> pending(nodes.size(), 0);
  std::vector<std::vector<size_t>> users(nodes.size());
  for (size_t i = 0; i < nodes.size(); ++i) {
    for (const auto &in : nodes[i].inputs) {
      if (!graph.contains(in))
        throw Error(ErrorCode::InvalidGraph, "node '" + nodes[i].id +
                                                 "' reads unknown node '" + in +
                                                 "'");
      users[graph.position(in)].push_back(i);
      ++pending[i];
    }
  }
  std::priority_queue<size_t, std::vector<size_t>, std::greater<>> ready;
  for (size_t i = 0; i < nodes.size(); ++i)
    if (!pending[i])
      ready.push(i);
  std::vector<std::string> order;
  order.reserve(nodes.size());
  while (!ready.empty()) {
    size_t i = ready.top();
    ready.pop();
    order.push_back(nodes[i].id);
    for (size_t u : users[i])
      if (--pending[u] == 0)
        ready.push(u);
  }
  if (order.size() != nodes.size())
    throw Error(ErrorCode::CycleDetected,
                "graph '" + graph.name() + "' is not acyclic");
  return order;
}

Graph replaceNode(const Graph &graph, const std::string &oldId, Node newNode) {
  if (!graph.contains(oldId))
    throw Error(ErrorCode::UnknownNode, "cannot replace unknown node '" +
                                            oldId + "'");
  if (newNode.id != oldId && graph.contains(newNode.id))
    throw Error(ErrorCode::InvalidGraph,
                "replacement id '" + newNode.id + "' already in use");
  auto oldShapes = inferShapes(graph);
  Graph out(graph.name());
  std::string newId = newNode.id;
  for (const auto &n : graph.nodes()) {
    if (n.id == oldId)
      out.addNode(newNode);
    else
      out.addNode(n);
  }
  if (newId != oldId)
    for (const auto &n : graph.nodes())
      if (n.id != oldId)
        for (auto &in : out.mutableNode(n.id).inputs)
          if (in == oldId)
            in = newId;
  auto newShapes = inferShapes(out);
  if (newShapes.at(newId) != oldShapes.at(oldId))
    throw Error(ErrorCode::ShapeMismatch,
                "replacement '" + newId + "' produces " +
                    shapeToString(newShapes.at(newId)) + ", expected " +
                    shapeToString(oldShapes.at(oldId)));
  return out;
}

namespace {
std::string doubleKey(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

struct AttrKeyVisitor {
  std::ostringstream &os;
  void operator()(int64_t v) const { os << "i" << v; }
  void operator()(double v) const { os << "f" << doubleKey(v); }
  void operator()(const std::string &v) const {
    os << "s" << v.size() << ":" << v;
  }
  void operator()(const std::vector<int64_t> &v) const {
    os << "I" << v.size();
    for (auto x : v)
      os << "," << x;
  }
  void operator()(const std::vector<double> &v) const {
    os << "F" << v.size();
    for (auto x : v)
      os << "," << doubleKey(x);
  }
  void operator()(const std::vector<std::string> &v) const {
    os << "S" << v.size();
    for (auto &x : v)
      os << "," << x.size() << ":" << x;
  }
};

void qparamsKey(std::ostringstream &os, const std::optional<QuantParams> &qp) {
  if (!qp) {
    os << "none";
    return;
  }
  os << qp->bitWidth << "/" << doubleKey(qp->step) << "/" << qp->zeroPoint
     << "/" << qp->symmetric;
}
} // namespace

std::string nodeContentKey(const Node &node) {
  std::ostringstream os;
  os << kindName(node.kind) << "|p" << node.precision << "|q";
  qparamsKey(os, node.outputQuant);
  os << "|in";
  for (const auto &in : node.inputs)
    os << "," << in.size() << ":" << in;
  os << "|attrs";
  for (const auto &[name, value] : node.attrs) {
    os << ";" << name << "=";
    std::visit(AttrKeyVisitor{os}, value);
  }
  os << "|w";
  for (const auto &[name, t] : node.weights) {
    os << ";" << name << ":" << dtypeName(t.dtype()) << shapeToString(t.shape())
       << ":";
    qparamsKey(os, t.qparams());
    os << ":" << sha256Hex(t.bytes());
  }
  return os.str();
}

namespace {
/// Removes nodes that cannot reach the Output node. \returns true if changed.
bool eliminateDeadCode(Graph &g) {
  std::unordered_set<std::string> live;
  std::vector<std::string> work{g.outputNode().id};
  while (!work.empty()) {
    auto id = work.back();
    work.pop_back();
    if (!live.insert(id).second)
      continue;
    for (const auto &in : g.node(id).inputs)
      work.push_back(in);
  }
  // The Input node is part of the signature even if unused.
  live.insert(g.inputNode().id);
  std::vector<std::string> dead;
  for (const auto &n : g.nodes())
    if (!live.count(n.id))
      dead.push_back(n.id);
  for (const auto &id : dead)
    g.removeNode(id);
  return !dead.empty();
}

/// Quantize(Dequantize(x)) == x when the Quantize re-uses x's own parameters.
bool eliminateRoundTrips(Graph &g) {
  bool changed = false;
  for (const auto &n : std::vector<Node>(g.nodes())) {
    if (n.kind != NodeKind::Quantize)
      continue;
    const auto &dq = g.node(n.inputs[0]);
    if (dq.kind != NodeKind::Dequantize)
      continue;
    const auto &src = g.node(dq.inputs[0]);
    if (src.outputQuant && n.outputQuant && *src.outputQuant == *n.outputQuant) {
      g.redirectUses(n.id, src.id);
      changed = true;
    }
  }
  return changed;
}

bool eliminateCommonSubexpressions(Graph &g) {
  bool changed = false;
  std::map<std::string, std::string> seen;
  for (const auto &id : topoSort(g)) {
    const auto &n = g.node(id);
    if (n.kind == NodeKind::Input || n.kind == NodeKind::Output)
      continue;
    auto key = nodeContentKey(n);
    auto [it, inserted] = seen.emplace(key, id);
    if (!inserted) {
      g.redirectUses(id, it->second);
      changed = true;
    }
  }
  return changed;
}
} // namespace

Graph dceCse(const Graph &graph) {
  Graph g = graph;
  bool changed = true;
  while (changed) {
    changed = false;
    changed |= eliminateRoundTrips(g);
    changed |= eliminateCommonSubexpressions(g);
    changed |= eliminateDeadCode(g);
  }
  return g;
}

//===----------------------------------------------------------------------===//
// Shape inference
//===----------------------------------------------------------------------===//

namespace {
int64_t convOut(int64_t in, int64_t k, int64_t stride, int64_t pad) {
  return (in + 2 * pad - k) / stride + 1;
}

Shape inferNode(const Node &n, const std::vector<Shape> &ins) {
  auto shapeErr = [&](const std::string &msg) {
    return Error(ErrorCode::ShapeMismatch,
                 std::string(kindName(n.kind)) + " '" + n.id + "': " + msg);
  };
  switch (n.kind) {
  case NodeKind::Input:
    return n.intsAttr("shape");
  case NodeKind::Output:
  case NodeKind::ReLU:
  case NodeKind::Quantize:
  case NodeKind::Dequantize:
  case NodeKind::Softmax:
    return ins[0];
  case NodeKind::BatchNorm:
    if (ins[0].size() < 2 || ins[0][1] != n.weight("gamma").shape()[0])
      throw shapeErr("channel count " + shapeToString(ins[0]) +
                     " does not match parameters");
    return ins[0];
  case NodeKind::Add:
    if (ins[0] != ins[1])
      throw shapeErr("operand shapes " + shapeToString(ins[0]) + " and " +
                     shapeToString(ins[1]) + " differ");
    return ins[0];
  case NodeKind::Conv2d:
  case NodeKind::DepthwiseConv2d: {
    const auto &x = ins[0];
    const auto &w = n.weight("weight").shape();
    if (x.size() != 4)
      throw shapeErr("input must be NCHW, got " + shapeToString(x));
    bool dw = n.kind == NodeKind::DepthwiseConv2d;
    if ((dw && w[0] != x[1]) || (!dw && w[1] != x[1]))
      throw shapeErr("input channels " + std::to_string(x[1]) +
                     " do not match weight " + shapeToString(w));
    auto stride = n.intAttr("stride", 1), pad = n.intAttr("pad", 0);
    Shape out{x[0], w[0], convOut(x[2], w[2], stride, pad),
              convOut(x[3], w[3], stride, pad)};
    if (out[2] <= 0 || out[3] <= 0)
      throw shapeErr("kernel larger than padded input");
    return out;
  }
  case NodeKind::MaxPool:
  case NodeKind::AvgPool: {
    const auto &x = ins[0];
    if (x.size() != 4)
      throw shapeErr("input must be NCHW");
    auto k = n.intAttr("kernel"), s = n.intAttr("stride", k),
         p = n.intAttr("pad", 0);
    Shape out{x[0], x[1], convOut(x[2], k, s, p), convOut(x[3], k, s, p)};
    if (out[2] <= 0 || out[3] <= 0)
      throw shapeErr("window larger than input");
    return out;
  }
  case NodeKind::GlobalAvgPool:
    if (ins[0].size() != 4)
      throw shapeErr("input must be NCHW");
    return {ins[0][0], ins[0][1], 1, 1};
  case NodeKind::Flatten:
    return {ins[0][0], numElements(ins[0]) / ins[0][0]};
  case NodeKind::Gemm: {
    const auto &w = n.weight("weight").shape();
    int64_t k = numElements(ins[0]) / ins[0][0];
    if (k != w[1])
      throw shapeErr("inner dimension " + std::to_string(k) +
                     " does not match weight " + shapeToString(w));
    return {ins[0][0], w[0]};
  }
  }
  throw Error(ErrorCode::UnsupportedKind, "cannot infer shape");
}
} // namespace

std::map<std::string, Shape> inferShapes(const Graph &graph) {
  std::map<std::string, Shape> shapes;
  for (const auto &id : topoSort(graph)) {
    const auto &n = graph.node(id);
    std::vector<Shape> ins;
    for (const auto &in : n.inputs) {
      auto it = shapes.find(in);
      if (it == shapes.end())
        throw Error(ErrorCode::UnresolvedShape,
                    "input '" + in + "' of '" + id + "' has no shape");
      ins.push_back(it->second);
    }
    shapes[id] = inferNode(n, ins);
  }
  return shapes;
}

} // namespace mixq
