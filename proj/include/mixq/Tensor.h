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
#ifndef MIXQ_TENSOR_H
#define MIXQ_TENSOR_H

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace mixq {

using Shape = std::vector<int64_t>;

enum class DType { F32, I8, I32 };

const char *dtypeName(DType dt);
DType dtypeFromName(const std::string &name);
size_t dtypeSize(DType dt);

/// \returns the number of elements described by \p shape.
int64_t numElements(const Shape &shape);
std::string shapeToString(const Shape &shape);

/// Per-tensor affine quantization parameters: real = (q - zeroPoint) * step.
struct QuantParams {
  int bitWidth{8};
  double step{1.0};
  int32_t zeroPoint{0};
  bool symmetric{false};

  /// Smallest representable code: -128 asymmetric, -127 symmetric (8 bit).
  int32_t qmin() const;
  /// Largest representable code.
  int32_t qmax() const;
  /// Throws InvalidArgument if the invariants (step > 0, symmetric => zp == 0,
  /// zp inside the code range) do not hold.
  void validate() const;

  bool operator==(const QuantParams &other) const = default;
};

/// Dense row-major tensor. I8 tensors always carry QuantParams, F32 never do;
/// I32 tensors (quantized biases, accumulators) may.
class Tensor {
public:
  Tensor() = default;

  static Tensor f32(Shape shape, std::vector<float> data);
  static Tensor i8(Shape shape, std::vector<int8_t> data, QuantParams qp);
  static Tensor i32(Shape shape, std::vector<int32_t> data,
                    std::optional<QuantParams> qp = std::nullopt);
  static Tensor zeros(Shape shape);

  const Shape &shape() const { return shape_; }
  DType dtype() const { return dtype_; }
  int64_t size() const { return numElements(shape_); }
  const std::optional<QuantParams> &qparams() const { return qparams_; }

  std::span<const float> f32() const;
  std::span<float> f32();
  std::span<const int8_t> i8() const;
  std::span<int8_t> i8();
  std::span<const int32_t> i32() const;
  std::span<int32_t> i32();

  /// \returns a copy with a new shape of the same element count.
  Tensor reshaped(Shape shape) const;

  /// Little-endian raw element bytes.
  std::vector<uint8_t> bytes() const;
  static Tensor fromBytes(DType dt, Shape shape, std::span<const uint8_t> raw,
                          std::optional<QuantParams> qp);

  /// Bit-exact comparison of dtype, shape, qparams and payload.
  bool bitEqual(const Tensor &other) const;

private:
  Shape shape_;
  DType dtype_{DType::F32};
  std::variant<std::vector<float>, std::vector<int8_t>, std::vector<int32_t>>
      data_;
  std::optional<QuantParams> qparams_;
};

} // namespace mixq

#endif // MIXQ_TENSOR_H
