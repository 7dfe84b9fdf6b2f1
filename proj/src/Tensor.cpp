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

#include "mixq/Tensor.h"
#include "mixq/Error.h"

#include <algorithm>
#include <bit>
#include <cstring>
#include <sstream>

namespace mixq {

const char *errorCodeName(ErrorCode code) {
  switch (code) {
  case ErrorCode::InvalidArgument:
    return "InvalidArgument";
  case ErrorCode::InvalidGraph:
    return "InvalidGraph";
  case ErrorCode::CycleDetected:
    return "CycleDetected";
  case ErrorCode::UnknownNode:
    return "UnknownNode";
  case ErrorCode::ShapeMismatch:
    return "ShapeMismatch";
  case ErrorCode::UnsupportedKind:
    return "UnsupportedKind";
  case ErrorCode::MissingQuantParams:
    return "MissingQuantParams";
  case ErrorCode::NonPositiveVariance:
    return "NonPositiveVariance";
  case ErrorCode::IoError:
    return "IoError";
  case ErrorCode::FormatVersionMismatch:
    return "FormatVersionMismatch";
  case ErrorCode::CorruptBlob:
    return "CorruptBlob";
  case ErrorCode::UnknownArch:
    return "UnknownArch";
  case ErrorCode::EmptyCalibrationSet:
    return "EmptyCalibrationSet";
  case ErrorCode::EmptyProfile:
    return "EmptyProfile";
  case ErrorCode::UnknownNodeInList:
    return "UnknownNodeInList";
  case ErrorCode::MissingCalibration:
    return "MissingCalibration";
  case ErrorCode::NonMonotonicIndices:
    return "NonMonotonicIndices";
  case ErrorCode::KeyMismatch:
    return "KeyMismatch";
  case ErrorCode::MissingLabels:
    return "MissingLabels";
  case ErrorCode::EmptyImageBatch:
    return "EmptyImageBatch";
  case ErrorCode::IncompleteConfig:
    return "IncompleteConfig";
  case ErrorCode::UnresolvedShape:
    return "UnresolvedShape";
  case ErrorCode::StageMismatch:
    return "StageMismatch";
  }
  return "Unknown";
}

const char *dtypeName(DType dt) {
  switch (dt) {
  case DType::F32:
    return "f32";
  case DType::I8:
    return "i8";
  case DType::I32:
    return "i32";
  }
  return "?";
}

DType dtypeFromName(const std::string &name) {
  if (name == "f32")
    return DType::F32;
  if (name == "i8")
    return DType::I8;
  if (name == "i32")
    return DType::I32;
  throw Error(ErrorCode::InvalidArgument, "unknown dtype '" + name + "'");
}

size_t dtypeSize(DType dt) {
  switch (dt) {
  case DType::F32:
  case DType::I32:
    return 4;
  case DType::I8:
    return 1;
  }
  return 0;
}

int64_t numElements(const Shape &shape) {
  int64_t n = 1;
  for (auto d : shape)
    n *= d;
  return n;
}

std::string shapeToString(const Shape &shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i)
    os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

int32_t QuantParams::qmin() const {
  int32_t lo = -(int32_t(1) << (bitWidth - 1));
  return symmetric ? lo + 1 : lo;
}

int32_t QuantParams::qmax() const {
  return int32_t((int64_t(1) << (bitWidth - 1)) - 1);
}

void QuantParams::validate() const {
  if (bitWidth != 8 && bitWidth != 32)
    throw Error(ErrorCode::InvalidArgument,
                "bit width must be 8 or 32, got " + std::to_string(bitWidth));
  if (!(step > 0.0))
    throw Error(ErrorCode::InvalidArgument, "quantization step must be > 0");
  if (symmetric && zeroPoint != 0)
    throw Error(ErrorCode::InvalidArgument,
                "symmetric quantization requires zero point 0");
  if (zeroPoint < qmin() || zeroPoint > qmax())
    throw Error(ErrorCode::InvalidArgument, "zero point out of code range");
}

static void checkShape(const Shape &shape, size_t len) {
  for (auto d : shape)
    if (d <= 0)
      throw Error(ErrorCode::ShapeMismatch,
                  "non-positive dimension in " + shapeToString(shape));
  if (numElements(shape) != int64_t(len))
    throw Error(ErrorCode::ShapeMismatch,
                "shape " + shapeToString(shape) + " does not hold " +
                    std::to_string(len) + " elements");
}

Tensor Tensor::f32(Shape shape, std::vector<float> data) {
  checkShape(shape, data.size());
  Tensor t;
  t.shape_ = std::move(shape);
  t.dtype_ = DType::F32;
  t.data_ = std::move(data);
  return t;
}

Tensor Tensor::i8(Shape shape, std::vector<int8_t> data, QuantParams qp) {
  checkShape(shape, data.size());
  qp.validate();
  Tensor t;
  t.shape_ = std::move(shape);
  t.dtype_ = DType::I8;
  t.data_ = std::move(data);
  t.qparams_ = qp;
  return t;
}

Tensor Tensor::i32(Shape shape, std::vector<int32_t> data,
                   std::optional<QuantParams> qp) {
  checkShape(shape, data.size());
  Tensor t;
  t.shape_ = std::move(shape);
  t.dtype_ = DType::I32;
  t.data_ = std::move(data);
  t.qparams_ = qp;
  return t;
}

Tensor Tensor::zeros(Shape shape) {
  auto n = numElements(shape);
  return f32(std::move(shape), std::vector<float>(size_t(n), 0.0f));
}

std::span<const float> Tensor::f32() const {
  if (dtype_ != DType::F32)
    throw Error(ErrorCode::InvalidArgument, "tensor is not f32");
  return std::get<std::vector<float>>(data_);
}
std::span<float> Tensor::f32() {
  if (dtype_ != DType::F32)
    throw Error(ErrorCode::InvalidArgument, "tensor is not f32");
  return std::get<std::vector<float>>(data_);
}
std::span<const int8_t> Tensor::i8() const {
  if (dtype_ != DType::I8)
    throw Error(ErrorCode::InvalidArgument, "tensor is not i8");
  return std::get<std::vector<int8_t>>(data_);
}
std::span<int8_t> Tensor::i8() {
  if (dtype_ != DType::I8)
    throw Error(ErrorCode::InvalidArgument, "tensor is not i8");
  return std::get<std::vector<int8_t>>(data_);
}
std::span<const int32_t> Tensor::i32() const {
  if (dtype_ != DType::I32)
    throw Error(ErrorCode::InvalidArgument, "tensor is not i32");
  return std::get<std::vector<int32_t>>(data_);
}
std::span<int32_t> Tensor::i32() {
  if (dtype_ != DType::I32)
    throw Error(ErrorCode::InvalidArgument, "tensor is not i32");
  return std::get<std::vector<int32_t>>(data_);
}

Tensor Tensor::reshaped(Shape shape) const {
  if (numElements(shape) != size())
    throw Error(ErrorCode::ShapeMismatch, "cannot reshape " +
                                              shapeToString(shape_) + " to " +
                                              shapeToString(shape));
  Tensor t = *this;
  t.shape_ = std::move(shape);
  return t;
}

namespace {
template <typename T> void appendLE(std::vector<uint8_t> &out, T value) {
  uint8_t raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(raw, raw + sizeof(T));
  out.insert(out.end(), raw, raw + sizeof(T));
}

template <typename T> T readLE(const uint8_t *p) {
  uint8_t raw[sizeof(T)];
  std::memcpy(raw, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(raw, raw + sizeof(T));
  T v;
  std::memcpy(&v, raw, sizeof(T));
  return v;
}
} // namespace

std::vector<uint8_t> Tensor::bytes() const {
  std::vector<uint8_t> out;
  out.reserve(size_t(size()) * dtypeSize(dtype_));
  std::visit(
      [&](const auto &vec) {
        for (auto v : vec)
          appendLE(out, v);
      },
      data_);
  return out;
}

Tensor Tensor::fromBytes(DType dt, Shape shape, std::span<const uint8_t> raw,
                         std::optional<QuantParams> qp) {
  auto n = numElements(shape);
  if (raw.size() != size_t(n) * dtypeSize(dt))
    throw Error(ErrorCode::CorruptBlob, "blob length does not match shape");
  switch (dt) {
  case DType::F32: {
    std::vector<float> v(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i)
      v[size_t(i)] = readLE<float>(raw.data() + 4 * i);
    return f32(std::move(shape), std::move(v));
  }
  case DType::I8: {
    if (!qp)
      throw Error(ErrorCode::MissingQuantParams, "i8 blob without qparams");
    std::vector<int8_t> v(static_cast<size_t>(n));
    std::memcpy(v.data(), raw.data(), size_t(n));
    return i8(std::move(shape), std::move(v), *qp);
  }
  case DType::I32: {
    std::vector<int32_t> v(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i)
      v[size_t(i)] = readLE<int32_t>(raw.data() + 4 * i);
    return i32(std::move(shape), std::move(v), qp);
  }
  }
  throw Error(ErrorCode::InvalidArgument, "bad dtype");
}

bool Tensor::bitEqual(const Tensor &other) const {
  return dtype_ == other.dtype_ && shape_ == other.shape_ &&
         qparams_ == other.qparams_ && bytes() == other.bytes();
}

} // namespace mixq
