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

#include "mixq/Quantizer.h"
#include "mixq/Error.h"
#include "mixq/Fusion.h"

#include "json.hpp"

#include <fstream>
#include <set>

namespace mixq {

namespace {

bool producesInt8(const Node &n) {
  return n.precision == 8 || n.kind == NodeKind::Quantize;
}

/// Group indices named by \p keep; rejects unknown and duplicate entries.
std::set<int> resolveKeepList(const GroupIndex &index, const Graph &graph,
                              const DequantNodeList &keep) {
  std::set<std::string> seen;
  std::set<int> groups;
  for (const auto &id : keep) {
    if (!seen.insert(id).second)
      throw Error(ErrorCode::InvalidArgument,
                  "dequantized node list names '" + id + "' twice");
    int g = index.find(id);
    if (g < 0)
      throw Error(ErrorCode::UnknownNodeInList,
                  "'" + id + "' is not a quantizable node of graph '" +
                      graph.name() + "'");
    groups.insert(g);
  }
  return groups;
}

std::set<std::string> keptNodes(const GroupIndex &index,
                                const std::set<int> &groups) {
  std::set<std::string> ids;
  for (int g : groups)
    for (const auto &m : index.groups()[size_t(g)].members)
      ids.insert(m);
  return ids;
}

/// Inserts a Quantize on every F32 -> int8 edge and a Dequantize on every
/// int8 -> F32 edge. Quantize adapters carry the producer's calibrated
/// parameters, which is what the int8 consumer was built against.
template <typename ActParams>
Graph insertAdapters(const Graph &g, ActParams actParams) {
  Graph out(g.name());
  for (const auto &n : g.nodes()) {
    Node copy = n;
    bool int8Consumer = n.precision == 8;
    for (size_t k = 0; k < n.inputs.size(); ++k) {
      const Node &p = g.node(n.inputs[k]);
      if (int8Consumer && !producesInt8(p)) {
        Node q(n.id + "/q" + std::to_string(k), NodeKind::Quantize, {p.id});
        q.outputQuant = actParams(p);
        copy.inputs[k] = q.id;
        out.addNode(std::move(q));
      } else if (!int8Consumer && producesInt8(p) &&
                 n.kind != NodeKind::Dequantize) {
        Node dq(n.id + "/dq" + std::to_string(k), NodeKind::Dequantize, {p.id});
        copy.inputs[k] = dq.id;
        out.addNode(std::move(dq));
      }
    }
    out.addNode(std::move(copy));
  }
  return out;
}

} // namespace

Graph applyMixedPrecision(const Graph &graph, const DequantNodeList &keep,
                          const CalibrationProfile &calib,
                          const QuantizeOptions &options) {
  graph.validate();
  GroupIndex index(graph);
  auto keep32 = keptNodes(index, resolveKeepList(index, graph, keep));

  auto actParams = [&](const Node &n) {
    return activationQParams(calib.at(n.outputAlias()), 8,
                             options.activationRange);
  };

  Graph g = graph;
  const auto &nodes = graph.nodes();
  // Traverse from the last node to the first.
  for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
    const Node &node = *it;
    if (!isQuantizableKind(node.kind) || node.precision == 8 ||
        keep32.count(node.id))
      continue;
    Node q = node;
    q.precision = 8;
    q.outputQuant = actParams(node);
    if (hasWeightTensor(node.kind)) {
      const auto &w = node.weight("weight");
      auto wq = weightQParams(w);
      q.weights["weight"] = quantizeAffine(w, wq);
      if (const Tensor *b = node.findWeight("bias")) {
        auto inQ = actParams(graph.node(node.inputs[0]));
        QuantParams bq{32, inQ.step * wq.step, 0, true};
        q.weights["bias"] = quantizeAffine(*b, bq);
      }
    }
    g = replaceNode(g, node.id, std::move(q));
  }

  g = dceCse(insertAdapters(g, actParams));
  g.validate();
  return g;
}

int countQdq(const Graph &graph) {
  int count = 0;
  for (const auto &n : graph.nodes())
    count += n.kind == NodeKind::Quantize || n.kind == NodeKind::Dequantize;
  return count;
}

PrecisionConfig configForKeepList(const Graph &graph,
                                  const DequantNodeList &keep) {
  GroupIndex index(graph);
  auto keep32 = keptNodes(index, resolveKeepList(index, graph, keep));
  PrecisionConfig cfg;
  for (const auto &n : graph.nodes())
    if (isQuantizableKind(n.kind))
      cfg[n.id] = keep32.count(n.id) ? 32 : 8;
  return cfg;
}

DequantNodeList selectDequantSet(const std::vector<std::string> &sensitivityList,
                                 const Graph &graph,
                                 double targetReductionPct) {
  if (!(targetReductionPct >= 0.0 && targetReductionPct <= 100.0))
    throw Error(ErrorCode::InvalidArgument,
                "target reduction must lie in [0, 100]");
  GroupIndex index(graph);
  auto shapes = inferShapes(graph);

  // Per-group MAC totals let the walk update BOPs incrementally.
  int64_t fp32 = 0, int8 = 0;
  std::vector<int64_t> groupMacs(index.groups().size(), 0);
  for (const auto &n : graph.nodes()) {
    int64_t macs = countMacs(n, shapes);
    fp32 += 32 * macs;
    if (isQuantizableKind(n.kind)) {
      int8 += 8 * macs;
      groupMacs[size_t(index.find(n.id))] += macs;
    } else {
      int8 += 32 * macs;
    }
  }
  auto normalized = [&](int64_t config) {
    return fp32 > int8 ? 100.0 * double(fp32 - config) / double(fp32 - int8)
                       : 0.0;
  };

  DequantNodeList keep;
  std::set<int> taken;
  int64_t config = int8;
  if (normalized(config) <= targetReductionPct)
    return keep;
  for (const auto &id : sensitivityList) {
    int g = index.find(id);
    if (g < 0)
      throw Error(ErrorCode::UnknownNodeInList,
                  "sensitivity list names unknown layer '" + id + "'");
    if (!taken.insert(g).second)
      continue;
    keep.push_back(index.groups()[size_t(g)].anchor);
    config += 24 * groupMacs[size_t(g)];
    if (normalized(config) <= targetReductionPct)
      break;
  }
  return keep;
}

void saveNodeList(const std::vector<std::string> &ids,
                  const std::string &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
  for (const auto &id : ids)
    out << id << "\n";
}

std::vector<std::string> loadNodeList(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::IoError, "cannot read list '" + path + "'");
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (!line.empty())
      ids.push_back(line);
  }
  return ids;
}

void savePrecisionConfig(const PrecisionConfig &cfg, const std::string &path) {
  nlohmann::json j;
  j["layers"] = cfg;
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
  out << j.dump(1) << "\n";
}

PrecisionConfig loadPrecisionConfig(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::IoError, "cannot read '" + path + "'");
  try {
    return nlohmann::json::parse(in).at("layers").get<PrecisionConfig>();
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::IoError,
                "malformed precision config '" + path + "': " + e.what());
  }
}

} // namespace mixq
