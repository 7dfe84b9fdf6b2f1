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
#ifndef MIXQ_QUANTIZER_H
#define MIXQ_QUANTIZER_H

#include "mixq/Bops.h"
#include "mixq/Calibration.h"
#include "mixq/Graph.h"
#include "mixq/QuantMath.h"

#include <string>
#include <vector>

namespace mixq {

/// Ids of the layers to keep at 32 bits. Entries name fusion-group anchors
/// (any member id is accepted and expands to its whole group).
using DequantNodeList = std::vector<std::string>;

struct QuantizeOptions {
  RangeOptions activationRange{};
};

/// Graph-node-level mixed precision. Walks the nodes from last to first and
/// replaces every quantizable node whose group is not named in \p keep by its
/// int8 counterpart, then inserts Quantize/Dequantize adapters at each
/// F32/int8 boundary and cleans up with dceCse. Node ids are preserved.
Graph applyMixedPrecision(const Graph &graph, const DequantNodeList &keep,
                          const CalibrationProfile &calib,
                          const QuantizeOptions &options = {});

/// Number of Quantize plus Dequantize nodes.
int countQdq(const Graph &graph);

/// Walks \p sensitivityList head first, keeping whole groups at 32 bits until
/// the normalized BOPs reduction first drops to \p targetReductionPct or
/// below. \returns the anchors of the kept groups, in list order.
DequantNodeList selectDequantSet(const std::vector<std::string> &sensitivityList,
                                 const Graph &graph, double targetReductionPct);

/// Precision config that \p keep induces on \p graph (group-expanded).
PrecisionConfig configForKeepList(const Graph &graph,
                                  const DequantNodeList &keep);

/// Plain-text list files: one id per line, order preserved.
void saveNodeList(const std::vector<std::string> &ids, const std::string &path);
std::vector<std::string> loadNodeList(const std::string &path);

/// precision.json: {"layers": {id: 8|32}}.
void savePrecisionConfig(const PrecisionConfig &cfg, const std::string &path);
PrecisionConfig loadPrecisionConfig(const std::string &path);

} // namespace mixq

#endif // MIXQ_QUANTIZER_H
