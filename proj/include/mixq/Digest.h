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
#ifndef MIXQ_DIGEST_H
#define MIXQ_DIGEST_H

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>

namespace mixq {

/// Incremental SHA-256 (OpenSSL EVP underneath).
class Sha256 {
public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256 &) = delete;
  Sha256 &operator=(const Sha256 &) = delete;

  void update(std::span<const uint8_t> data);
  void update(std::string_view text);
  /// \returns the lowercase hex digest. The hasher must not be reused.
  std::string hexDigest();

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::string sha256Hex(std::span<const uint8_t> data);
std::string sha256Hex(std::string_view text);
/// Digest of a file's bytes; throws IoError if unreadable.
std::string sha256File(const std::string &path);

} // namespace mixq

#endif // MIXQ_DIGEST_H
