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

#include "mixq/ModelIO.h"
#include "mixq/Error.h"

#include "json.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

namespace fs = std::filesystem;
using nlohmann::json;

namespace mixq {

namespace {

std::vector<uint8_t> readFile(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::IoError, "cannot read '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json parseJsonFile(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::IoError, "cannot read '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception &e) {
    throw Error(ErrorCode::IoError,
                "malformed JSON in '" + path + "': " + e.what());
  }
}

void writeFile(const std::string &path, const void *data, size_t size) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !out.write(static_cast<const char *>(data),
                         std::streamsize(size)))
    throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
}

json qparamsToJson(const QuantParams &qp) {
  return {{"bits", qp.bitWidth},
          {"step", qp.step},
          {"zero_point", qp.zeroPoint},
          {"symmetric", qp.symmetric}};
}

QuantParams qparamsFromJson(const json &j) {
  QuantParams qp;
  qp.bitWidth = j.at("bits").get<int>();
  qp.step = j.at("step").get<double>();
  qp.zeroPoint = j.at("zero_point").get<int32_t>();
  qp.symmetric = j.at("symmetric").get<bool>();
  return qp;
}

// Attributes carry an explicit type tag so ints and floats survive the trip.
json attrToJson(const AttrValue &v) {
  static const char *tags[] = {"int", "float", "str", "ints", "floats", "strs"};
  json out;
  out["type"] = tags[v.index()];
  std::visit([&](const auto &x) { out["value"] = x; }, v);
  return out;
}

AttrValue attrFromJson(const json &j) {
  auto tag = j.at("type").get<std::string>();
  const auto &v = j.at("value");
  if (tag == "int")
    return v.get<int64_t>();
  if (tag == "float")
    return v.get<double>();
  if (tag == "str")
    return v.get<std::string>();
  if (tag == "ints")
    return v.get<std::vector<int64_t>>();
  if (tag == "floats")
    return v.get<std::vector<double>>();
  if (tag == "strs")
    return v.get<std::vector<std::string>>();
  throw Error(ErrorCode::IoError, "unknown attribute type '" + tag + "'");
}

} // namespace

void saveModel(const Graph &graph, const std::string &dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    throw Error(ErrorCode::IoError, "cannot create '" + dir + "'");

  std::vector<uint8_t> blob;
  json blobs = json::object();
  json nodes = json::array();
  for (const auto &n : graph.nodes()) {
    json jn;
    jn["id"] = n.id;
    jn["kind"] = kindName(n.kind);
    jn["inputs"] = n.inputs;
    jn["precision"] = n.precision;
    json attrs = json::object();
    for (const auto &[k, v] : n.attrs)
      attrs[k] = attrToJson(v);
    jn["attrs"] = attrs;
    if (n.outputQuant)
      jn["output_quant"] = qparamsToJson(*n.outputQuant);
    json weights = json::object();
    for (const auto &[name, t] : n.weights) {
      std::string blobName = n.id + "/" + name;
      auto raw = t.bytes();
      json jb{{"dtype", dtypeName(t.dtype())},
              {"shape", t.shape()},
              {"offset", blob.size()},
              {"length", raw.size()}};
      if (t.qparams())
        jb["quant"] = qparamsToJson(*t.qparams());
      blobs[blobName] = jb;
      blob.insert(blob.end(), raw.begin(), raw.end());
      weights[name] = blobName;
    }
    jn["weights"] = weights;
    nodes.push_back(jn);
  }
  json manifest{{"format_version", kModelFormatVersion},
                {"name", graph.name()},
                {"nodes", nodes},
                {"blobs", blobs}};
  std::string text = manifest.dump(1) + "\n";
  writeFile((fs::path(dir) / "manifest.json").string(), text.data(),
            text.size());
  writeFile((fs::path(dir) / "weights.bin").string(), blob.data(),
            blob.size());
}

Graph loadModel(const std::string &dir) {
  std::string manifestPath = (fs::path(dir) / "manifest.json").string();
  json m = parseJsonFile(manifestPath);
  auto blob = readFile((fs::path(dir) / "weights.bin").string());
  try {
    int version = m.at("format_version").get<int>();
    if (version != kModelFormatVersion)
      throw Error(ErrorCode::FormatVersionMismatch,
                  "model format version " + std::to_string(version) +
                      ", expected " + std::to_string(kModelFormatVersion));
    const auto &blobs = m.at("blobs");
    Graph g(m.at("name").get<std::string>());
    for (const auto &jn : m.at("nodes")) {
      Node n(jn.at("id").get<std::string>(),
             kindFromName(jn.at("kind").get<std::string>()),
             jn.at("inputs").get<std::vector<std::string>>());
      n.precision = jn.at("precision").get<int>();
      for (const auto &[k, v] : jn.at("attrs").items())
        n.attrs[k] = attrFromJson(v);
      if (jn.contains("output_quant"))
        n.outputQuant = qparamsFromJson(jn.at("output_quant"));
      for (const auto &[name, ref] : jn.at("weights").items()) {
        auto blobName = ref.get<std::string>();
        if (!blobs.contains(blobName))
          throw Error(ErrorCode::CorruptBlob,
                      "manifest references missing blob '" + blobName + "'");
        const auto &jb = blobs.at(blobName);
        auto offset = jb.at("offset").get<uint64_t>();
        auto length = jb.at("length").get<uint64_t>();
        if (offset > blob.size() || length > blob.size() - offset)
          throw Error(ErrorCode::CorruptBlob,
                      "blob '" + blobName + "' lies outside weights.bin");
        std::optional<QuantParams> qp;
        if (jb.contains("quant"))
          qp = qparamsFromJson(jb.at("quant"));
        n.weights.emplace(
            name, Tensor::fromBytes(
                      dtypeFromName(jb.at("dtype").get<std::string>()),
                      jb.at("shape").get<Shape>(),
                      std::span<const uint8_t>(blob.data() + offset, length),
                      qp));
      }
      g.addNode(std::move(n));
    }
    return g;
  } catch (const json::exception &e) {
    throw Error(ErrorCode::IoError,
                "malformed manifest '" + manifestPath + "': " + e.what());
  }
}

void saveImages(const std::vector<Tensor> &images, const std::string &path) {
  if (images.empty())
    throw Error(ErrorCode::EmptyImageBatch, "no images to save");
  Shape s = images.front().shape();
  if (s.size() != 4 || s[0] != 1)
    throw Error(ErrorCode::ShapeMismatch, "images must be [1, C, H, W]");
  std::vector<uint8_t> out;
  auto putU32 = [&](uint32_t v) {
    for (int b = 0; b < 4; ++b)
      out.push_back(uint8_t(v >> (8 * b)));
  };
  putU32(uint32_t(images.size()));
  putU32(uint32_t(s[1]));
  putU32(uint32_t(s[2]));
  putU32(uint32_t(s[3]));
  for (const auto &img : images) {
    if (img.shape() != s || img.dtype() != DType::F32)
      throw Error(ErrorCode::ShapeMismatch, "images differ in shape or dtype");
    auto raw = img.bytes();
    out.insert(out.end(), raw.begin(), raw.end());
  }
  writeFile(path, out.data(), out.size());
}

std::vector<Tensor> loadImages(const std::string &path) {
  auto raw = readFile(path);
  if (raw.size() < 16)
    throw Error(ErrorCode::CorruptBlob, "'" + path + "' lacks a header");
  auto getU32 = [&](size_t at) {
    uint32_t v = 0;
    for (int b = 0; b < 4; ++b)
      v |= uint32_t(raw[at + size_t(b)]) << (8 * b);
    return v;
  };
  uint64_t count = getU32(0);
  Shape shape{1, getU32(4), getU32(8), getU32(12)};
  uint64_t perImage = uint64_t(numElements(shape)) * 4;
  if (count == 0)
    throw Error(ErrorCode::EmptyImageBatch, "'" + path + "' holds no images");
  if (raw.size() != 16 + count * perImage)
    throw Error(ErrorCode::CorruptBlob,
                "'" + path + "' size does not match its header");
  std::vector<Tensor> images;
  for (uint64_t i = 0; i < count; ++i)
    images.push_back(Tensor::fromBytes(
        DType::F32, shape,
        std::span<const uint8_t>(raw.data() + 16 + i * perImage, perImage),
        std::nullopt));
  return images;
}

void saveLabels(const std::vector<int64_t> &labels, const std::string &path) {
  std::string text = json(labels).dump() + "\n";
  writeFile(path, text.data(), text.size());
}

std::vector<int64_t> loadLabels(const std::string &path) {
  try {
    return parseJsonFile(path).get<std::vector<int64_t>>();
  } catch (const json::exception &e) {
    throw Error(ErrorCode::IoError,
                "labels '" + path + "' are not an integer array");
  }
}

} // namespace mixq
