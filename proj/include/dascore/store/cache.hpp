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

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>

#include "dascore/core/error.hpp"
#include "dascore/core/json.hpp"
#include "dascore/util/digest.hpp"

namespace dascore::store {

/// Key for a backend response: hash(backend_id, endpoint, canonical request).
inline std::string cache_key(std::string_view backend_id, std::string_view endpoint,
                             const Json& request) {
  return canonical_hash(Json::array({backend_id, endpoint, request}));
}

/// Content-addressed, write-once key/value store. A second put under the same
/// key must carry identical bytes; anything else means a backend answered
/// the same request differently or the key schema is wrong.
class Cache {
 public:
  virtual ~Cache() = default;
  virtual std::optional<std::string> get(std::string_view key) const = 0;
  virtual void put(std::string_view key, std::string_view value) = 0;
  virtual std::size_t size() const = 0;
};

class MemoryCache final : public Cache {
 public:
  std::optional<std::string> get(std::string_view key) const override {
    std::shared_lock lock(mutex_);
    auto it = entries_.find(std::string(key));
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  void put(std::string_view key, std::string_view value) override {
    std::unique_lock lock(mutex_);
    auto [it, inserted] = entries_.try_emplace(std::string(key), value);
    if (!inserted && it->second != value) {
      throw IntegrityError("cache key " + std::string(key) + " already holds different bytes");
    }
  }

  std::size_t size() const override {
    std::shared_lock lock(mutex_);
    return entries_.size();
  }

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::string, std::less<>> entries_;
};

/// One file per key under `root/<first two hex chars>/<key>`. Writes go to a
/// temporary file first and are renamed into place, so readers never see a
/// partial blob.
class DirectoryCache final : public Cache {
 public:
  explicit DirectoryCache(std::filesystem::path root) : root_(std::move(root)) {
    std::error_code ec;
    std::filesystem::create_directories(root_, ec);
    if (ec) throw IoError("cannot create cache directory " + root_.string() + ": " + ec.message());
  }

  std::optional<std::string> get(std::string_view key) const override {
    std::shared_lock lock(mutex_);
    return read(path_for(key));
  }

  void put(std::string_view key, std::string_view value) override {
    std::unique_lock lock(mutex_);
    const auto path = path_for(key);
    if (auto existing = read(path)) {
      if (*existing != value) {
        throw IntegrityError("cache key " + std::string(key) + " already holds different bytes");
      }
      return;
    }
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
    auto tmp = path;
    tmp += ".tmp" + std::to_string(counter_.fetch_add(1)) + "." + std::to_string(::getpid());
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out.write(value.data(), static_cast<std::streamsize>(value.size()));
      if (!out) throw IoError("cannot write cache blob " + tmp.string());
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot publish cache blob " + path.string() + ": " + ec.message());
  }

  std::size_t size() const override {
    std::shared_lock lock(mutex_);
    std::size_t count = 0;
    std::error_code ec;
    for (auto it = std::filesystem::recursive_directory_iterator(root_, ec);
         !ec && it != std::filesystem::recursive_directory_iterator(); it.increment(ec)) {
      if (it->is_regular_file() && it->path().extension().empty()) ++count;
    }
    return count;
  }

  /// Removes every blob and returns how many there were. There is no
  /// eviction; this is the explicit prune.
  std::size_t prune() {
    const std::size_t count = size();
    std::unique_lock lock(mutex_);
    std::error_code ec;
    std::filesystem::remove_all(root_, ec);
    std::filesystem::create_directories(root_, ec);
    return count;
  }

  const std::filesystem::path& root() const noexcept { return root_; }

 private:
  std::filesystem::path path_for(std::string_view key) const {
    if (key.size() < 3 || key.find_first_of("/\\.") != std::string_view::npos) {
      throw InvalidArgument("malformed cache key '" + std::string(key) + "'");
    }
    return root_ / std::string(key.substr(0, 2)) / std::string(key);
  }

  static std::optional<std::string> read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return std::move(buffer).str();
  }

  std::filesystem::path root_;
  mutable std::shared_mutex mutex_;
  std::atomic<unsigned> counter_{0};
};

}  // namespace dascore::store
