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

#include <atomic>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "dascore/backend/transport.hpp"
#include "dascore/core/image.hpp"
#include "dascore/core/json.hpp"
#include "dascore/store/cache.hpp"
#include "dascore/store/ledger.hpp"

namespace dascore::backend {

/// Replaces inline base64 images with their content hash so ledger payloads
/// stay small. The cache keeps the full bytes.
inline Json strip_inline_images(const Json& value) {
  if (value.is_object()) {
    Json out = Json::object();
    for (const auto& [key, child] : value.items()) {
      if (key == "image_b64" && child.is_string()) {
        try {
          out["image_b64_sha256"] = util::sha256_hex(util::base64_decode(child.get<std::string>()));
        } catch (const Error&) {
          out["image_b64_sha256"] = nullptr;
        }
      } else {
        out[key] = strip_inline_images(child);
      }
    }
    return out;
  }
  if (value.is_array()) {
    Json out = Json::array();
    for (const auto& child : value) out.push_back(strip_inline_images(child));
    return out;
  }
  return value;
}

/// Engine-side view of one backend: every call is looked up in the
/// response cache first and recorded in the run ledger either way.
///
/// `identity` is the request as far as caching is concerned. It is usually
/// the wire body, but a caller may substitute a smaller equivalent (a VQA
/// call keys on the image hash rather than its bytes) or add fields the
/// wire never sees (the VQA temperature).
class Client {
 public:
  Client(std::shared_ptr<Transport> transport, std::shared_ptr<store::Cache> cache = nullptr,
         std::shared_ptr<store::Ledger> ledger = nullptr)
      : transport_(std::move(transport)), cache_(std::move(cache)), ledger_(std::move(ledger)) {
    require(transport_ != nullptr, "client needs a transport");
  }

  std::string backend_id() const { return transport_->id(); }
  std::size_t backend_calls() const noexcept { return backend_calls_.load(); }
  std::size_t cache_hits() const noexcept { return cache_hits_.load(); }
  const std::shared_ptr<store::Ledger>& ledger() const noexcept { return ledger_; }

  Json call(store::EntryKind kind, std::string_view endpoint, const Json& body,
            const Json& identity, std::string_view session_id) {
    const std::string id = backend_id();
    const std::string key = store::cache_key(id, endpoint, identity);
    if (cache_) {
      if (auto hit = cache_->get(key)) {
        Json response = parse_json(*hit);
        cache_hits_.fetch_add(1);
        record(kind, session_id, endpoint, id, key, identity, &response, nullptr, true);
        return response;
      }
    }
    Json response;
    try {
      backend_calls_.fetch_add(1);
      response = transport_->post(endpoint, body);
    } catch (const Error& e) {
      record(kind, session_id, endpoint, id, key, identity, nullptr, &e, false);
      throw;
    }
    if (cache_) cache_->put(key, canonical(response));
    record(kind, session_id, endpoint, id, key, identity, &response, nullptr, false);
    return response;
  }

  /// Sends a call that is neither cached nor ledgered (simulator bookkeeping).
  Json post_uncached(std::string_view endpoint, const Json& body) {
    return transport_->post(endpoint, body);
  }

 private:
  void record(store::EntryKind kind, std::string_view session_id, std::string_view endpoint,
              const std::string& id, const std::string& key, const Json& identity,
              const Json* response, const Error* error, bool cached) {
    if (!ledger_) return;
    store::LedgerEntry entry;
    entry.timestamp = store::utc_timestamp();
    entry.session_id = std::string(session_id);
    entry.kind = kind;
    entry.request_hash = key;
    Json payload{{"endpoint", std::string(endpoint)},
                 {"backend_id", id},
                 {"request", strip_inline_images(identity)},
                 {"cached", cached}};
    if (response) {
      entry.response_hash = canonical_hash(*response);
      payload["response"] = strip_inline_images(*response);
    } else if (error) {
      payload["error"] = Json{{"code", std::string(to_string(error->code()))},
                              {"message", error->what()}};
    }
    entry.payload = std::move(payload);
    ledger_->append(entry);
  }

  std::shared_ptr<Transport> transport_;
  std::shared_ptr<store::Cache> cache_;
  std::shared_ptr<store::Ledger> ledger_;
  std::atomic<std::size_t> backend_calls_{0};
  std::atomic<std::size_t> cache_hits_{0};
};

/// Image bytes by content hash, so later requests can send bytes for an
/// image that is only known by reference.
class ImageStore {
 public:
  explicit ImageStore(std::shared_ptr<store::Cache> blobs = std::make_shared<store::MemoryCache>())
      : blobs_(std::move(blobs)) {}

  void put(const ImageRef& image) {
    if (!image.has_bytes()) return;
    blobs_->put(image.sha256(), image.bytes());
    if (!image.media_type().empty()) {
      blobs_->put(image.sha256() + "-media", image.media_type());
    }
  }

  /// Returns a ref with bytes attached when they are known.
  ImageRef resolve(const ImageRef& image) const {
    if (image.has_bytes()) return image;
    if (auto bytes = blobs_->get(image.sha256())) {
      std::string media = image.media_type();
      if (media.empty()) {
        if (auto m = blobs_->get(image.sha256() + "-media")) media = *m;
      }
      return ImageRef::from_bytes(std::move(*bytes), media);
    }
    return image;
  }

 private:
  std::shared_ptr<store::Cache> blobs_;
};

}  // namespace dascore::backend
