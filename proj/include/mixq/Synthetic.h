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
#ifndef MIXQ_SYNTHETIC_H
#define MIXQ_SYNTHETIC_H

#include "mixq/Executor.h"
#include "mixq/Graph.h"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace mixq {

/// Seeded generator with a pinned recurrence: mt19937_64 words, uniform
/// doubles from the top 53 bits, normals by Box-Muller (cosine branch only).
/// Unlike the std distributions, its output is identical on every platform.
class Rng {
public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform() { return double(engine_() >> 11) * 0x1.0p-53; }
  double normal();
  /// Uniform integer in [0, n).
  uint64_t below(uint64_t n) { return next() % n; }

private:
  std::mt19937_64 engine_;
};

/// Known synthetic architectures: "mininet", "mini_resnet", "mini_mobilenet".
std::vector<std::string> syntheticArchs();

/// Deterministic graph for (arch, seed). Throws UnknownArch.
Graph genSynthetic(const std::string &arch, uint64_t seed);

/// \p count seeded N(0, 1) images shaped like the graph input.
std::vector<Tensor> genImages(const Graph &graph, size_t count, uint64_t seed);

/// Scales a seeded \p fraction of \p nodeId's weights by \p factor, leaving
/// a heavy-tailed weight distribution. At least one weight is scaled.
Graph injectWeightPathology(const Graph &graph, const std::string &nodeId,
                            double factor = 50.0, double fraction = 0.02,
                            uint64_t seed = 7);

/// Labels equal to the FP32 model's own argmax (one pass per image).
std::vector<int64_t> teacherLabels(Executor &exec, const Graph &graph,
                                   const std::vector<Tensor> &images);

} // namespace mixq

#endif // MIXQ_SYNTHETIC_H
