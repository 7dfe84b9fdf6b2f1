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
#ifndef MIXQ_CALIBRATION_H
#define MIXQ_CALIBRATION_H

#include "mixq/Executor.h"
#include "mixq/Graph.h"
#include "mixq/Tensor.h"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace mixq {

constexpr size_t kDefaultHistogramBins = 2048;

/// Running histogram over a range that widens as new values arrive. When the
/// range grows, existing counts are re-binned by bin centre.
class HistogramProfile {
public:
  explicit HistogramProfile(size_t numBins = kDefaultHistogramBins);

  void update(std::span<const float> values);
  /// Commutative merge of two partial profiles (re-bins both onto the union
  /// range).
  static HistogramProfile merge(const HistogramProfile &a,
                                const HistogramProfile &b);

  bool empty() const { return total_ == 0; }
  double min() const { return min_; }
  double max() const { return max_; }
  uint64_t total() const { return total_; }
  const std::vector<uint64_t> &bins() const { return bins_; }

  /// Lower/upper edges of the range holding all but \p tail of the mass on
  /// each side.
  std::pair<double, double> percentileRange(double tail) const;

  /// Rebuilds a profile from serialized fields; checks the invariants.
  static HistogramProfile fromParts(double min, double max,
                                    std::vector<uint64_t> bins,
                                    uint64_t total);

private:
  size_t binIndex(double v) const;
  void rebin(double newMin, double newMax);

  double min_{0.0};
  double max_{0.0};
  std::vector<uint64_t> bins_;
  uint64_t total_{0};
};

/// Output-activation histograms of every executed node (including the
/// Input, whose range feeds the first Quantize adapter).
struct CalibrationProfile {
  std::map<std::string, HistogramProfile> nodes;
  uint64_t imageCount{0};

  const HistogramProfile &at(const std::string &id) const;
  bool covers(const std::string &id) const { return nodes.count(id); }
};

/// One FP32 pass per image with capture, accumulating histograms.
CalibrationProfile profileActivations(Executor &exec, const Graph &graph,
                                      const std::vector<Tensor> &images,
                                      size_t numBins = kDefaultHistogramBins);

enum class RangeMode { MinMax, Percentile };

struct RangeOptions {
  RangeMode mode{RangeMode::MinMax};
  /// Mass clipped from each tail in Percentile mode (e.g. 0.0001).
  double tail{0.0};
};

/// Asymmetric activation parameters from a histogram:
///   step = (max - min) / (2^bits - 1), zero point maps min to -2^(bits-1).
/// The range is widened to contain 0 first so zero is exactly representable.
/// A degenerate profile (min == max) yields step 1, zero point 0.
QuantParams activationQParams(const HistogramProfile &profile, int bits = 8,
                              RangeOptions options = {});

/// Symmetric per-tensor weight parameters: step = max|W| / (2^(bits-1) - 1).
/// All-zero weights yield step 1.
QuantParams weightQParams(const Tensor &weights, int bits = 8);

/// calib.json round trip. calibrationToJson is the exact file content.
std::string calibrationToJson(const CalibrationProfile &profile);
void saveCalibration(const CalibrationProfile &profile,
                     const std::string &path);
CalibrationProfile loadCalibration(const std::string &path);

} // namespace mixq

#endif // MIXQ_CALIBRATION_H
