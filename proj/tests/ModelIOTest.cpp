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

#include "TestGraphs.h"

#include "mixq/Error.h"
#include "mixq/Fusion.h"
#include "mixq/ModelIO.h"
#include "mixq/Quantizer.h"

#include <gtest/gtest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>

using namespace mixq;
using namespace mixq::testing;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string &name) {
  auto p = fs::temp_directory_path() / ("mixq_io_" + name);
  fs::remove_all(p);
  return p;
}

ErrorCode loadCode(const fs::path &dir) {
  try {
    loadModel(dir.string());
  } catch (const Error &e) {
    return e.code();
  }
  ADD_FAILURE() << "load succeeded";
  return ErrorCode::InvalidArgument;
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

} // namespace

TEST(ModelIO, Fp32RoundTripIsBitExact) {
  for (const auto &arch : syntheticArchs()) {
    Graph g = genSynthetic(arch, 42);
    auto dir = scratch(arch);
    saveModel(g, dir.string());
    Graph back = loadModel(dir.string());
    EXPECT_TRUE(back.structurallyEqual(g)) << arch;
    for (const auto &n : g.nodes())
      for (const auto &[name, w] : n.weights)
        EXPECT_TRUE(back.node(n.id).weight(name).bitEqual(w)) << n.id;
  }
}

TEST(ModelIO, QuantizedRoundTripRunsIdentically) {
  Graph g = genSynthetic("mininet", 3);
  auto calib = calibrate(g, 4);
  Graph q =
      applyMixedPrecision(lowerToStage(g, IrStage::Fused), {"conv3"}, calib);
  auto dir = scratch("quant");
  saveModel(q, dir.string());
  Graph back = loadModel(dir.string());
  EXPECT_TRUE(back.structurallyEqual(q));
  Executor exec;
  for (const auto &x : genImages(g, 3, 5))
    EXPECT_TRUE(exec.runQuantized(q, x).output.bitEqual(
        exec.runQuantized(back, x).output));
  // Saving twice gives identical bytes.
  auto again = scratch("quant2");
  saveModel(back, again.string());
  EXPECT_EQ(slurp(dir / "manifest.json"), slurp(again / "manifest.json"));
  EXPECT_EQ(slurp(dir / "weights.bin"), slurp(again / "weights.bin"));
}

TEST(ModelIO, TruncatedWeightsAreCorrupt) {
  auto dir = scratch("trunc");
  saveModel(chainC1R1C2(), dir.string());
  auto bin = dir / "weights.bin";
  fs::resize_file(bin, fs::file_size(bin) - 4);
  EXPECT_EQ(loadCode(dir), ErrorCode::CorruptBlob);
}

TEST(ModelIO, MissingBlobIsCorrupt) {
  auto dir = scratch("missing");
  saveModel(chainC1R1C2(), dir.string());
  auto j = nlohmann::json::parse(slurp(dir / "manifest.json"));
  j["blobs"].erase(j["blobs"].begin());
  std::ofstream(dir / "manifest.json") << j.dump();
  EXPECT_EQ(loadCode(dir), ErrorCode::CorruptBlob);
}

TEST(ModelIO, VersionMismatch) {
  auto dir = scratch("version");
  saveModel(chainC1R1C2(), dir.string());
  auto j = nlohmann::json::parse(slurp(dir / "manifest.json"));
  j["format_version"] = kModelFormatVersion + 1;
  std::ofstream(dir / "manifest.json") << j.dump();
  EXPECT_EQ(loadCode(dir), ErrorCode::FormatVersionMismatch);
}

TEST(ModelIO, MissingDirectoryIsIoError) {
  EXPECT_EQ(loadCode(scratch("absent")), ErrorCode::IoError);
}

TEST(ModelIO, ImagesAndLabelsRoundTrip) {
  Graph g = genSynthetic("mininet", 1);
  auto images = genImages(g, 3, 4);
  auto path = (scratch("img") += ".bin").string();
  saveImages(images, path);
  auto back = loadImages(path);
  ASSERT_EQ(back.size(), images.size());
  for (size_t i = 0; i < images.size(); ++i)
    EXPECT_TRUE(back[i].bitEqual(images[i]));

  auto lpath = (scratch("labels") += ".json").string();
  saveLabels({3, 0, 9}, lpath);
  EXPECT_EQ(loadLabels(lpath), (std::vector<int64_t>{3, 0, 9}));
}
