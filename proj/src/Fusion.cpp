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

#include "mixq/Fusion.h"
#include "mixq/Error.h"

#include <cmath>
#include <set>

namespace mixq {

namespace {

using ConsumerMap = std::unordered_map<std::string, std::vector<std::string>>;

/// \returns the single consumer of \p id, or nullptr if it has zero or
/// several uses.
const Node *soleConsumer(const Graph &g, const ConsumerMap &users,
                         const std::string &id) {
  auto it = users.find(id);
  if (it == users.end() || it->second.size() != 1)
    return nullptr;
  return &g.node(it->second.front());
}

void appendMember(Node &host, const Node &folded) {
  auto members = host.strsAttr("fused_members");
  for (const auto &id : folded.representedIds())
    members.push_back(id);
  host.attrs["fused_members"] = members;
  host.attrs["output_alias"] = folded.outputAlias();
}

} // namespace

std::vector<FusionGroup> discoverFusionGroups(const Graph &graph) {
  auto users = graph.consumers();
  auto order = topoSort(graph);

  std::vector<FusionGroup> chains;
  std::map<std::string, size_t> tailOf;
  std::set<std::string> claimed;
  for (const auto &id : order) {
    const auto &n = graph.node(id);
    if (!isConvKind(n.kind))
      continue;
    FusionGroup g{id, {id}};
    claimed.insert(id);
    const Node *next = soleConsumer(graph, users, id);
    if (next && next->kind == NodeKind::BatchNorm &&
        next->precision == n.precision) {
      g.members.push_back(next->id);
      claimed.insert(next->id);
    }
    tailOf[g.members.back()] = chains.size();
    chains.push_back(std::move(g));
  }

  // An Add joins the chain feeding its first operand that is a chain tail.
  std::set<size_t> hasAdd;
  for (const auto &id : order) {
    const auto &n = graph.node(id);
    if (n.kind != NodeKind::Add)
      continue;
    for (const auto &in : n.inputs) {
      auto it = tailOf.find(in);
      if (it == tailOf.end() || hasAdd.count(it->second))
        continue;
      const Node *sole = soleConsumer(graph, users, in);
      if (!sole || sole->id != id)
        continue;
      chains[it->second].members.push_back(id);
      claimed.insert(id);
      hasAdd.insert(it->second);
      break;
    }
  }

  for (auto &g : chains) {
    const Node *next = soleConsumer(graph, users, g.members.back());
    if (next && next->kind == NodeKind::ReLU && !claimed.count(next->id)) {
      g.members.push_back(next->id);
      claimed.insert(next->id);
    }
  }

  std::map<std::string, FusionGroup> byAnchor;
  for (auto &g : chains)
    byAnchor.emplace(g.anchor, std::move(g));
  std::vector<FusionGroup> out;
  for (const auto &id : order) {
    auto it = byAnchor.find(id);
    if (it != byAnchor.end()) {
      out.push_back(std::move(it->second));
      continue;
    }
    if (isQuantizableKind(graph.node(id).kind) && !claimed.count(id))
      out.push_back(FusionGroup{id, {id}});
  }
  return out;
}

GroupIndex::GroupIndex(const Graph &graph)
    : groups_(discoverFusionGroups(graph)) {
  for (size_t i = 0; i < groups_.size(); ++i)
    for (const auto &m : groups_[i].members)
      for (const auto &rep : graph.node(m).representedIds()) {
        owner_[rep] = int(i);
        host_[rep] = m;
      }
}

int GroupIndex::find(const std::string &id) const {
  auto it = owner_.find(id);
  return it == owner_.end() ? -1 : it->second;
}

std::string GroupIndex::hostOf(const std::string &id) const {
  auto it = host_.find(id);
  return it == host_.end() ? id : it->second;
}

Graph fuseConvBn(const Graph &graph) {
  Graph g = graph;
  auto users = g.consumers();
  std::vector<std::string> bns;
  for (const auto &n : g.nodes())
    if (n.kind == NodeKind::BatchNorm)
      bns.push_back(n.id);
  for (const auto &bnId : bns) {
    const Node bn = g.node(bnId);
    const Node &producer = g.node(bn.inputs[0]);
    if (!isConvKind(producer.kind) || producer.precision != 32 ||
        bn.precision != 32 || producer.intAttr("fused_relu", 0))
      continue;
    const Node *sole = soleConsumer(g, users, producer.id);
    if (!sole || sole->id != bnId)
      continue;

    Node conv = producer;
    const auto &w = conv.weight("weight");
    auto gamma = bn.weight("gamma").f32(), beta = bn.weight("beta").f32(),
         mean = bn.weight("mean").f32(), var = bn.weight("var").f32();
    double eps = bn.floatAttr("epsilon");
    int64_t cout = w.shape()[0];
    int64_t perChannel = w.size() / cout;
    std::vector<float> newW(w.f32().begin(), w.f32().end());
    std::vector<float> newB(size_t(cout), 0.0f);
    const Tensor *bias = conv.findWeight("bias");
    for (int64_t c = 0; c < cout; ++c) {
      double scale = double(gamma[size_t(c)]) /
                     std::sqrt(double(var[size_t(c)]) + eps);
      for (int64_t k = 0; k < perChannel; ++k) {
        auto &v = newW[size_t(c * perChannel + k)];
        v = float(double(v) * scale);
      }
      double b = bias ? double(bias->f32()[size_t(c)]) : 0.0;
      newB[size_t(c)] =
          float(scale * (b - double(mean[size_t(c)])) + double(beta[size_t(c)]));
    }
    conv.weights["weight"] = Tensor::f32(w.shape(), std::move(newW));
    conv.weights["bias"] = Tensor::f32({cout}, std::move(newB));
    appendMember(conv, bn);

    g.mutableNode(producer.id) = std::move(conv);
    g.redirectUses(bnId, producer.id);
    g.removeNode(bnId);
    users = g.consumers();
  }
  return g;
}

Graph fuseConvRelu(const Graph &graph) {
  Graph g = graph;
  auto users = g.consumers();
  std::vector<std::string> relus;
  for (const auto &n : g.nodes())
    if (n.kind == NodeKind::ReLU)
      relus.push_back(n.id);
  for (const auto &reluId : relus) {
    const Node relu = g.node(reluId);
    const Node &producer = g.node(relu.inputs[0]);
    if (!isConvKind(producer.kind) || producer.precision != relu.precision ||
        producer.intAttr("fused_relu", 0))
      continue;
    const Node *sole = soleConsumer(g, users, producer.id);
    if (!sole || sole->id != reluId)
      continue;

    Node conv = producer;
    conv.attrs["fused_relu"] = int64_t(1);
    // The intermediate quantization at S_y disappears; the conv requantizes
    // straight to the ReLU's output scale S_a.
    if (conv.precision == 8)
      conv.outputQuant = relu.outputQuant;
    appendMember(conv, relu);

    g.mutableNode(producer.id) = std::move(conv);
    g.redirectUses(reluId, producer.id);
    g.removeNode(reluId);
    users = g.consumers();
  }
  return g;
}

const char *irStageName(IrStage stage) {
  return stage == IrStage::Unfused ? "unfused" : "fused";
}

IrStage irStageFromName(const std::string &name) {
  if (name == "unfused" || name == "A")
    return IrStage::Unfused;
  if (name == "fused" || name == "C")
    return IrStage::Fused;
  throw Error(ErrorCode::InvalidArgument, "unknown IR stage '" + name + "'");
}

Graph lowerToStage(const Graph &graph, IrStage stage) {
  if (stage == IrStage::Unfused)
    return graph;
  Graph g = graph;
  for (;;) {
    size_t before = g.size();
    g = fuseConvRelu(fuseConvBn(g));
    if (g.size() == before)
      return g;
  }
}

} // namespace mixq
