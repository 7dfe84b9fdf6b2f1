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
#ifndef MIXQ_MODELIO_H
#define MIXQ_MODELIO_H

#include "mixq/Graph.h"
#include "mixq/Tensor.h"

#include <string>
#include <vector>

namespace mixq {

constexpr int kModelFormatVersion = 1;

/// Writes `<dir>/manifest.json` and `<dir>/weights.bin`, creating \p dir.
/// Blobs are little-endian and row-major, in node order.
void saveModel(const Graph &graph, const std::string &dir);
/// Inverse of saveModel; bit-exact for every dtype.
Graph loadModel(const std::string &dir);

/// images.bin: u32 count, C, H, W, then count*C*H*W little-endian f32.
/// Each image is returned as a [1, C, H, W] tensor.
void saveImages(const std::vector<Tensor> &images, const std::string &path);
std::vector<Tensor> loadImages(const std::string &path);

/// labels.json: a JSON array of integers.
void saveLabels(const std::vector<int64_t> &labels, const std::string &path);
std::vector<int64_t> loadLabels(const std::string &path);

} // namespace mixq

#endif // MIXQ_MODELIO_H
