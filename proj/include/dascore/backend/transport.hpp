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
#include <chrono>
#include <memory>
#include <string>
#include <string_view>

#include "httplib.h"

#include "dascore/core/error.hpp"
#include "dascore/core/json.hpp"

namespace dascore::backend {

inline constexpr std::string_view kDecomposeEndpoint = "/v1/decompose";
inline constexpr std::string_view kVqaEndpoint = "/v1/vqa";
inline constexpr std::string_view kGenerateEndpoint = "/v1/generate";
/// Simulator-only: tells a served simulator which decomposition a prompt uses.
inline constexpr std::string_view kSimRegisterEndpoint = "/v1/sim/register";

/// Moves one JSON request to a backend endpoint and returns its JSON reply.
/// Implementations raise TransportError when the backend cannot be reached
/// and ProtocolError when it answers with an error or a non-JSON body.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual std::string id() const = 0;
  virtual Json post(std::string_view endpoint, const Json& body) = 0;
};

struct HttpOptions {
  std::chrono::milliseconds connect_timeout{5000};
  std::chrono::milliseconds read_timeout{600000};
  std::string bearer_token;
};

/// Splits "http://host:port/prefix" into the scheme-host-port part httplib
/// wants and a path prefix prepended to every endpoint.
inline std::pair<std::string, std::string> split_base_url(std::string_view url) {
  const auto scheme = url.find("://");
  if (scheme == std::string_view::npos || url.substr(0, scheme) != "http") {
    throw InvalidArgument("backend URL must start with http:// (got '" + std::string(url) + "')");
  }
  const auto path_start = url.find('/', scheme + 3);
  if (path_start == std::string_view::npos) return {std::string(url), ""};
  std::string prefix(url.substr(path_start));
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {std::string(url.substr(0, path_start)), prefix};
}

class HttpTransport final : public Transport {
 public:
  explicit HttpTransport(std::string base_url, HttpOptions options = {})
      : base_url_(std::move(base_url)), options_(std::move(options)) {
    auto [host, prefix] = split_base_url(base_url_);
    host_ = std::move(host);
    prefix_ = std::move(prefix);
  }

  std::string id() const override { return base_url_; }

  Json post(std::string_view endpoint, const Json& body) override {
    httplib::Client client(host_);
    client.set_connection_timeout(options_.connect_timeout);
    client.set_read_timeout(options_.read_timeout);
    if (!options_.bearer_token.empty()) client.set_bearer_token_auth(options_.bearer_token);
    const std::string path = prefix_ + std::string(endpoint);
    auto result = client.Post(path, canonical(body), "application/json");
    if (!result) {
      throw TransportError("POST " + base_url_ + std::string(endpoint) +
                           " failed: " + httplib::to_string(result.error()));
    }
    Json reply;
    try {
      reply = Json::parse(result->body);
    } catch (const Json::parse_error&) {
      throw ProtocolError("backend " + base_url_ + std::string(endpoint) + " returned status " +
                              std::to_string(result->status) + " with a non-JSON body",
                          result->status);
    }
    if (result->status < 200 || result->status >= 300) {
      std::string message = reply.is_object() && reply.contains("error") && reply["error"].is_string()
                                ? reply["error"].get<std::string>()
                                : result->body;
      throw ProtocolError("backend " + base_url_ + std::string(endpoint) + " rejected request (" +
                              std::to_string(result->status) + "): " + message,
                          result->status);
    }
    return reply;
  }

 private:
  std::string base_url_;
  HttpOptions options_;
  std::string host_;
  std::string prefix_;
};

/// Counts calls that reach the wrapped transport.
class CountingTransport final : public Transport {
 public:
  explicit CountingTransport(std::shared_ptr<Transport> inner) : inner_(std::move(inner)) {}

  std::string id() const override { return inner_->id(); }

  Json post(std::string_view endpoint, const Json& body) override {
    calls_.fetch_add(1);
    return inner_->post(endpoint, body);
  }

  std::size_t calls() const noexcept { return calls_.load(); }

 private:
  std::shared_ptr<Transport> inner_;
  std::atomic<std::size_t> calls_{0};
};

}  // namespace dascore::backend
