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
#ifndef MIXQ_FUSION_H
#define MIXQ_FUSION_H

#include "mixq/Graph.h"

#include <map>
#include <string>
#include <vector>

namespace mixq {

/// A conv-anchored producer/consumer chain conv[, bn][, add][, relu] that is
/// assigned a single precision. Quantizable nodes outside any conv chain form
/// singleton groups anchored by themselves.
struct FusionGroup {
  std::string anchor;
  std::vector<std::string> members;

  bool operator==(const FusionGroup &) const = default;
};

/// Groups in topological order of their anchors. The groups partition the
/// quantizable nodes of \p graph.
std::vector<FusionGroup> discoverFusionGroups(const Graph &graph);

/// Resolves any node id -- including ids that fusion folded into another
/// node -- to its group.
class GroupIndex {
public:
  explicit GroupIndex(const Graph &graph);

  const std::vector<FusionGroup> &groups() const { return groups_; }
  /// \returns the group index owning \p id, or -1.
  int find(const std::string &id) const;
  /// \returns the graph node that currently computes \p id (identity unless
  /// \p id was folded away).
  std::string hostOf(const std::string &id) const;

private:
  std::vector<FusionGroup> groups_;
  std::map<std::string, int> owner_;
  std::map<std::string, std::string> host_;
};

/// Folds BatchNorm into the producing conv:
///   W' = gamma / sqrt(var + eps) * W,
///   b' = gamma * (b - mean) / sqrt(var + eps) + beta.
Graph fuseConvBn(const Graph &graph);

/// Folds a ReLU into the producing conv as a clamp at zero. On int8 convs the
/// conv adopts the ReLU's output parameters, so the result is quantized once:
///   a_i8 = max(0, round(S_x S_w / S_a * acc)).
Graph fuseConvRelu(const Graph &graph);

enum class IrStage { Unfused, Fused };

const char *irStageName(IrStage stage);
IrStage irStageFromName(const std::string &name);

/// Unfused: identity. Fused: conv+bn folding then conv+relu folding,
/// applied until no pattern remains.
Graph lowerToStage(const Graph &graph, IrStage stage);

} // namespace mixq

#endif // MIXQ_FUSION_H
