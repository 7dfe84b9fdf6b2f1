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

#include "mixq/Sensitivity.h"
#include "mixq/Digest.h"
#include "mixq/Error.h"
#include "mixq/QuantMath.h"
#include "mixq/Quantizer.h"

#include <algorithm>
#include <limits>
#include <numeric>
#include <set>

namespace mixq {

const char *methodName(SensitivityMethod method) {
  switch (method) {
  case SensitivityMethod::QuantuneV2:
    return "quantune_v2";
  case SensitivityMethod::InOrder:
    return "in_order";
  case SensitivityMethod::WeightSqnr:
    return "weight_sqnr";
  case SensitivityMethod::Top1:
    return "top1";
  }
  return "?";
}

SensitivityMethod methodFromName(const std::string &name) {
  std::string n = name;
  std::replace(n.begin(), n.end(), '-', '_');
  for (auto m : {SensitivityMethod::QuantuneV2, SensitivityMethod::InOrder,
                 SensitivityMethod::WeightSqnr, SensitivityMethod::Top1})
    if (n == methodName(m))
      return m;
  throw Error(ErrorCode::InvalidArgument, "unknown method '" + name + "'");
}

int64_t argmax(const Tensor &t) {
  auto v = t.f32();
  if (v.empty())
    throw Error(ErrorCode::InvalidArgument, "argmax of an empty tensor");
  return std::max_element(v.begin(), v.end()) - v.begin();
}

namespace {

/// Quantizable node ids in topological order.
std::vector<std::string> quantizableLayers(const Graph &graph) {
  std::vector<std::string> layers;
  for (const auto &id : topoSort(graph))
    if (isQuantizableKind(graph.node(id).kind))
      layers.push_back(id);
  return layers;
}

/// Dense ascending ranks of \p values over \p layers; equal values keep the
/// order of \p layers.
std::map<std::string, double>
ascendingRanks(const std::vector<std::string> &layers,
               const std::map<std::string, double> &values) {
  std::vector<size_t> order(layers.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return values.at(layers[a]) < values.at(layers[b]);
  });
  std::map<std::string, double> ranks;
  for (size_t r = 0; r < order.size(); ++r)
    ranks[layers[order[r]]] = double(r);
  return ranks;
}

void checkKeys(const std::vector<std::string> &layers,
               const std::map<std::string, double> &m, const char *what) {
  bool ok = m.size() == layers.size();
  for (size_t i = 0; ok && i < layers.size(); ++i)
    ok = m.count(layers[i]) != 0;
  if (!ok)
    throw Error(ErrorCode::KeyMismatch,
                std::string(what) + " is not keyed by the ranked layer set");
}

double weightSqnrOf(const Node &node) {
  if (!hasWeightTensor(node.kind))
    return kSqnrCeilingDb;
  const Tensor &w = node.weight("weight");
  return sqnr(w, dequantize(quantizeAffine(w, weightQParams(w))));
}

SensitivityList makeList(std::vector<std::string> ids,
                         SensitivityMethod method,
                         const CalibrationProfile &calib) {
  SensitivityList list;
  list.ids = std::move(ids);
  list.method = method;
  list.calibrationDigest = sha256Hex(calibrationToJson(calib));
  return list;
}

/// Groups in the order given, each expanded anchor first.
std::vector<std::string> expandGroups(const GroupIndex &index,
                                      const std::vector<int> &groupOrder) {
  std::vector<std::string> ids;
  for (int g : groupOrder) {
    const auto &grp = index.groups()[size_t(g)];
    ids.push_back(grp.anchor);
    for (const auto &m : grp.members)
      if (m != grp.anchor)
        ids.push_back(m);
  }
  return ids;
}

} // namespace

std::vector<std::string>
rankLayersBySensitivity(const std::vector<std::string> &layers,
                        const std::map<std::string, double> &deltaW,
                        const std::map<std::string, double> &deltaA,
                        const std::map<std::string, double> &mse,
                        double mseMean, MixupWeights mixup) {
  if (std::set<std::string>(layers.begin(), layers.end()).size() !=
      layers.size())
    throw Error(ErrorCode::KeyMismatch, "ranked layer ids are not unique");
  checkKeys(layers, deltaW, "weight delta map");
  checkKeys(layers, deltaA, "activation delta map");
  checkKeys(layers, mse, "mse map");

  auto rankW = ascendingRanks(layers, deltaW);
  auto rankA = ascendingRanks(layers, deltaA);
  std::vector<size_t> order(layers.size());
  std::iota(order.begin(), order.end(), 0);
  auto score = [&](size_t i) {
    return mixup.weight * rankW.at(layers[i]) +
           mixup.activation * rankA.at(layers[i]);
  };
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return score(a) < score(b); });

  std::vector<size_t> outliers, rest;
  for (size_t i : order)
    (mse.at(layers[i]) > 5.0 * mseMean ? outliers : rest).push_back(i);
  std::stable_sort(outliers.begin(), outliers.end(), [&](size_t a, size_t b) {
    return mse.at(layers[a]) > mse.at(layers[b]);
  });

  std::vector<std::string> ranked;
  for (size_t i : outliers)
    ranked.push_back(layers[i]);
  for (size_t i : rest)
    ranked.push_back(layers[i]);
  return ranked;
}

std::vector<std::string>
adjustForFusionGroups(const std::vector<std::string> &ranked,
                      const GroupIndex &index) {
  std::map<int, size_t> anchorPos;
  for (size_t i = 0; i < ranked.size(); ++i) {
    int g = index.find(ranked[i]);
    if (g < 0)
      throw Error(ErrorCode::UnknownNodeInList,
                  "'" + ranked[i] + "' belongs to no fusion group");
    if (ranked[i] == index.groups()[size_t(g)].anchor)
      anchorPos[g] = i;
  }
  std::vector<int> groups;
  for (size_t g = 0; g < index.groups().size(); ++g) {
    if (!anchorPos.count(int(g)))
      throw Error(ErrorCode::KeyMismatch, "ranking misses group anchor '" +
                                              index.groups()[g].anchor + "'");
    groups.push_back(int(g));
  }
  std::stable_sort(groups.begin(), groups.end(), [&](int a, int b) {
    return anchorPos[a] < anchorPos[b];
  });
  return expandGroups(index, groups);
}

SensitivityResult generateSensitivityList(Executor &exec, const Graph &graph,
                                          const CalibrationProfile &calib,
                                          const std::vector<Tensor> &images,
                                          const SensitivityOptions &options) {
  if (images.empty())
    throw Error(ErrorCode::EmptyImageBatch, "sensitivity needs images");
  graph.validate();
  auto layers = quantizableLayers(graph);
  for (const auto &id : layers)
    calib.at(graph.node(id).outputAlias());

  QuantizeOptions qopts;
  qopts.activationRange = options.activationRange;
  Graph int8 = applyMixedPrecision(graph, {}, calib, qopts);

  std::map<std::string, double> actSqnr, actMse;
  for (const auto &img : images) {
    auto ref = exec.runFp32(graph, img, true);
    auto quant = exec.runQuantized(int8, img, true);
    for (const auto &id : layers) {
      auto r = ref.trace.outputs.find(id);
      auto q = quant.trace.outputs.find(id);
      if (r == ref.trace.outputs.end() || q == quant.trace.outputs.end())
        throw Error(ErrorCode::InvalidGraph,
                    "no captured activation for '" + id + "'");
      actSqnr[id] += sqnr(r->second, q->second);
      actMse[id] += mse(r->second, q->second);
    }
  }

  std::vector<MetricSample> samples;
  std::vector<std::pair<int64_t, double>> wSeries, aSeries;
  double mseSum = 0.0;
  for (size_t n = 0; n < layers.size(); ++n) {
    const Node &node = graph.node(layers[n]);
    MetricSample s;
    s.id = node.id;
    s.layerIndex = int64_t(n) + 1;
    s.hasWeights = hasWeightTensor(node.kind);
    s.weightSqnr = weightSqnrOf(node);
    if (s.hasWeights) {
      const Tensor &w = node.weight("weight");
      s.weightMse = mse(w, dequantize(quantizeAffine(w, weightQParams(w))));
      wSeries.emplace_back(s.layerIndex, s.weightSqnr);
    }
    s.activationSqnr = actSqnr[node.id] / double(images.size());
    s.activationMse = actMse[node.id] / double(images.size());
    aSeries.emplace_back(s.layerIndex, s.activationSqnr);
    mseSum += s.activationMse;
    samples.push_back(std::move(s));
  }

  // Weight deltas run over the weight-bearing layers only; the rest keep 0.
  auto wDelta = sqnrDelta(wSeries);
  auto aDelta = sqnrDelta(aSeries);
  size_t wi = 0;
  for (size_t n = 0; n < samples.size(); ++n) {
    samples[n].activationDelta = aDelta[n];
    if (samples[n].hasWeights)
      samples[n].weightDelta = wDelta[wi++];
  }

  std::map<std::string, double> keyW, keyA, mseMap;
  for (const auto &s : samples) {
    keyW[s.id] = options.useDeltas ? s.weightDelta : s.weightSqnr;
    keyA[s.id] = options.useDeltas ? s.activationDelta : s.activationSqnr;
    mseMap[s.id] = s.activationMse;
  }
  double mseMean = layers.empty() ? 0.0 : mseSum / double(layers.size());
  if (!options.prependMseOutliers)
    mseMean = std::numeric_limits<double>::infinity();
  auto ranked =
      rankLayersBySensitivity(layers, keyW, keyA, mseMap, mseMean,
                              options.mixup);

  SensitivityResult result;
  result.list = makeList(adjustForFusionGroups(ranked, GroupIndex(graph)),
                         SensitivityMethod::QuantuneV2, calib);
  result.samples = std::move(samples);
  return result;
}

SensitivityList baselineOrder(Executor &exec, const Graph &graph,
                              SensitivityMethod method,
                              const CalibrationProfile &calib,
                              const std::vector<Tensor> &images,
                              const std::vector<int64_t> *labels) {
  graph.validate();
  GroupIndex index(graph);
  std::vector<int> groups(index.groups().size());
  std::iota(groups.begin(), groups.end(), 0);

  switch (method) {
  case SensitivityMethod::InOrder:
    break;
  case SensitivityMethod::WeightSqnr: {
    // Weightless groups sort last, since their anchor SQNR is the ceiling.
    std::vector<double> key;
    for (const auto &g : index.groups())
      key.push_back(weightSqnrOf(graph.node(g.anchor)));
    std::stable_sort(groups.begin(), groups.end(),
                     [&](int a, int b) { return key[a] < key[b]; });
    break;
  }
  case SensitivityMethod::Top1: {
    if (!labels || labels->size() != images.size())
      throw Error(ErrorCode::MissingLabels,
                  "top1 ordering needs one label per image");
    if (images.empty())
      throw Error(ErrorCode::EmptyImageBatch, "top1 ordering needs images");
    auto accuracy = [&](auto &&run) {
      int64_t correct = 0;
      for (size_t i = 0; i < images.size(); ++i)
        correct += argmax(run(images[i])) == (*labels)[i];
      return double(correct) / double(images.size());
    };
    double base =
        accuracy([&](const Tensor &x) { return exec.runFp32(graph, x).output; });
    std::vector<double> drop(groups.size());
    for (int g : groups) {
      DequantNodeList keep;
      for (size_t o = 0; o < index.groups().size(); ++o)
        if (int(o) != g)
          keep.push_back(index.groups()[o].anchor);
      Graph q = applyMixedPrecision(graph, keep, calib);
      drop[size_t(g)] = base - accuracy([&](const Tensor &x) {
                          return exec.runQuantized(q, x).output;
                        });
    }
    std::stable_sort(groups.begin(), groups.end(),
                     [&](int a, int b) { return drop[a] > drop[b]; });
    break;
  }
  case SensitivityMethod::QuantuneV2:
    throw Error(ErrorCode::InvalidArgument,
                "quantune_v2 is not a baseline; use generateSensitivityList");
  }
  return makeList(expandGroups(index, groups), method, calib);
}

} // namespace mixq
