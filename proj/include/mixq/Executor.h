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
#ifndef MIXQ_EXECUTOR_H
#define MIXQ_EXECUTOR_H

#include "mixq/Graph.h"
#include "mixq/Tensor.h"

#include <atomic>
#include <cstdint>
#include <map>
#include <string>

namespace mixq {

/// Per-node outputs captured during one inference. Integer outputs are stored
/// dequantized so FP32 and int8 traces compare in one domain.
struct LayerTrace {
  std::map<std::string, Tensor> outputs;
  /// Executor pass counter right after the run that produced this trace.
  uint64_t passCounter{0};
};

struct RunResult {
  Tensor output;
  LayerTrace trace;
};

/// Reference interpreter. Counts every full-graph run so callers can verify
/// how many inference passes an analysis performed.
class Executor {
public:
  /// Pure FP32 execution; every node must be at precision 32 and no
  /// Quantize/Dequantize adapters may be present.
  RunResult runFp32(const Graph &graph, const Tensor &input,
                    bool capture = false);
  /// Mixed execution: int8 nodes run integer kernels, F32 nodes run the
  /// reference kernels, adapters convert at the boundaries.
  RunResult runQuantized(const Graph &graph, const Tensor &input,
                         bool capture = false);

  uint64_t passCount() const { return passes_.load(); }
  void resetPassCount() { passes_.store(0); }

private:
  RunResult run(const Graph &graph, const Tensor &input, bool capture,
                bool allowInt8);

  std::atomic<uint64_t> passes_{0};
};

/// Id of the node whose output feeds the final Softmax (the logits), or the
/// Output node's producer when there is no Softmax.
std::string logitNodeId(const Graph &graph);

} // namespace mixq

#endif // MIXQ_EXECUTOR_H
