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
#ifndef MIXQ_METRICS_H
#define MIXQ_METRICS_H

#include "mixq/Tensor.h"

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mixq {

/// Sentinels that keep SQNR finite: +200 dB for zero noise, -200 dB for zero
/// signal with non-zero noise.
constexpr double kSqnrCeilingDb = 200.0;
constexpr double kSqnrFloorDb = -200.0;

/// 10 log10(mean(ref^2) / mean((ref - test)^2)) in dB.
double sqnr(const Tensor &reference, const Tensor &test);
double sqnr(std::span<const float> reference, std::span<const float> test);

/// mean((ref - test)^2).
double mse(const Tensor &reference, const Tensor &test);
double mse(std::span<const float> reference, std::span<const float> test);

/// a.b / (|a| |b|); 0 when either norm is zero.
double cosineSimilarity(const Tensor &a, const Tensor &b);

constexpr size_t kDefaultKlBins = 256;
constexpr double kKlSmoothing = 1e-10;

/// KL(P || Q) in nats, where P and Q are histograms of \p reference and
/// \p test over the reference's value range, normalized and smoothed.
double klDivergence(const Tensor &reference, const Tensor &test,
                    size_t bins = kDefaultKlBins);
/// KL of two already-binned distributions (normalized and smoothed here).
double klDivergence(std::span<const double> p, std::span<const double> q);

/// (SQNR_n - SQNR_{n-1}) / (L_n - L_{n-1}); the first layer's delta is 0.
/// Throws NonMonotonicIndices unless the indices strictly increase.
std::vector<double>
sqnrDelta(const std::vector<std::pair<int64_t, double>> &sqnrByLayer);

/// Per-layer local metrics gathered by the sensitivity sweep.
struct MetricSample {
  std::string id;
  int64_t layerIndex{0};
  bool hasWeights{false};
  double weightSqnr{kSqnrCeilingDb};
  double weightMse{0.0};
  double activationSqnr{kSqnrCeilingDb};
  double activationMse{0.0};
  std::optional<double> cosine;
  std::optional<double> kl;
  double weightDelta{0.0};
  double activationDelta{0.0};
};

/// metrics.csv: id, L_n, weight_sqnr, act_sqnr, weight_delta, act_delta,
/// act_mse, weight_mse, cosine, kl.
void saveMetricsCsv(const std::vector<MetricSample> &samples,
                    const std::string &path);

} // namespace mixq

#endif // MIXQ_METRICS_H
