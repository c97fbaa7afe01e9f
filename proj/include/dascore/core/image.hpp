// Copyright 2026 The dascore Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <memory>
#include <string>
#include <string_view>

#include "dascore/core/error.hpp"
#include "dascore/util/digest.hpp"

namespace dascore {

/// An image known either by its bytes or only by the SHA-256 of its bytes.
/// The engine never looks at pixels; identity is the content hash.
class ImageRef {
 public:
  ImageRef() = default;

  static ImageRef from_bytes(std::string bytes, std::string media_type) {
    require(!bytes.empty(), "inline image bytes must be non-empty");
    ImageRef ref;
    ref.sha256_ = util::sha256_hex(bytes);
    ref.media_type_ = std::move(media_type);
    ref.bytes_ = std::make_shared<const std::string>(std::move(bytes));
    return ref;
  }

  static ImageRef from_hash(std::string sha256, std::string media_type = {}) {
    require(util::is_sha256_hex(sha256), "image reference must be a lowercase SHA-256 hex digest");
    ImageRef ref;
    ref.sha256_ = std::move(sha256);
    ref.media_type_ = std::move(media_type);
    return ref;
  }

  const std::string& sha256() const noexcept { return sha256_; }
  const std::string& media_type() const noexcept { return media_type_; }
  bool has_bytes() const noexcept { return bytes_ != nullptr; }
  bool empty() const noexcept { return sha256_.empty(); }

  const std::string& bytes() const {
    if (!bytes_) throw InvalidArgument("image " + sha256_ + " has no inline bytes");
    return *bytes_;
  }

  /// Identity is the hash; two refs to the same content compare equal
  /// whether or not they carry bytes.
  friend bool operator==(const ImageRef& a, const ImageRef& b) {
    return a.sha256_ == b.sha256_ && a.media_type_ == b.media_type_;
  }

 private:
  std::string sha256_;
  std::string media_type_;
  std::shared_ptr<const std::string> bytes_;
};

inline std::string guess_media_type(std::string_view path) {
  auto ends_with = [&](std::string_view suffix) {
    return path.size() >= suffix.size() && path.substr(path.size() - suffix.size()) == suffix;
  };
  if (ends_with(".png")) return "image/png";
  if (ends_with(".jpg") || ends_with(".jpeg")) return "image/jpeg";
  if (ends_with(".webp")) return "image/webp";
  if (ends_with(".simimg")) return "application/x-dascore-sim-image";
  return "application/octet-stream";
}

}  // namespace dascore
