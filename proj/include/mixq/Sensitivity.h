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
#ifndef MIXQ_SENSITIVITY_H
#define MIXQ_SENSITIVITY_H

#include "mixq/Calibration.h"
#include "mixq/Executor.h"
#include "mixq/Fusion.h"
#include "mixq/Graph.h"
#include "mixq/Metrics.h"

#include <map>
#include <string>
#include <vector>

namespace mixq {

enum class SensitivityMethod { QuantuneV2, InOrder, WeightSqnr, Top1 };

/// Canonical tag, e.g. "quantune_v2".
const char *methodName(SensitivityMethod method);
/// Accepts the canonical tag or its dashed spelling ("quantune-v2").
SensitivityMethod methodFromName(const std::string &name);

/// Layers ordered most sensitive first, with where the order came from.
struct SensitivityList {
  std::vector<std::string> ids;
  SensitivityMethod method{SensitivityMethod::QuantuneV2};
  IrStage irStage{IrStage::Unfused};
  std::string calibrationDigest;
};

struct MixupWeights {
  double weight{0.6};
  double activation{0.4};
};

struct SensitivityOptions {
  MixupWeights mixup{};
  RangeOptions activationRange{};
  /// Rank by SQNR deltas (default) or by raw per-layer SQNR.
  bool useDeltas{true};
  /// Move activation-MSE outliers to the head of the list.
  bool prependMseOutliers{true};
};

struct SensitivityResult {
  SensitivityList list;
  /// One sample per quantizable node, in topological order.
  std::vector<MetricSample> samples;
};

/// Ranks layers by w_w * rank(deltaW) + w_a * rank(deltaA), where rank 0 is
/// the most negative delta; ties fall back to the order of \p layers. Layers
/// whose mse exceeds 5 * mseMean are then moved to the front, largest mse
/// first. All maps must be keyed by exactly the ids in \p layers.
std::vector<std::string>
rankLayersBySensitivity(const std::vector<std::string> &layers,
                        const std::map<std::string, double> &deltaW,
                        const std::map<std::string, double> &deltaA,
                        const std::map<std::string, double> &mse,
                        double mseMean, MixupWeights mixup = {});

/// Reorders \p ranked so every fusion group sits at its anchor's position,
/// anchor first and the remaining members right behind it.
std::vector<std::string> adjustForFusionGroups(
    const std::vector<std::string> &ranked, const GroupIndex &index);

/// Runs each image once through the FP32 graph and once through its fully
/// int8 counterpart, derives per-layer weight/activation SQNR, deltas and
/// activation MSE, and ranks the layers.
SensitivityResult generateSensitivityList(Executor &exec, const Graph &graph,
                                          const CalibrationProfile &calib,
                                          const std::vector<Tensor> &images,
                                          const SensitivityOptions &options = {});

/// Baseline orderings. in_order and weight_sqnr run no inference; top1 runs
/// (groups + 1) passes per image and needs one label per image.
SensitivityList baselineOrder(Executor &exec, const Graph &graph,
                              SensitivityMethod method,
                              const CalibrationProfile &calib,
                              const std::vector<Tensor> &images,
                              const std::vector<int64_t> *labels = nullptr);

/// Index of the largest element of a logit or probability tensor.
int64_t argmax(const Tensor &t);

} // namespace mixq

#endif // MIXQ_SENSITIVITY_H
