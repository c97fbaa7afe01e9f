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
#include <thread>

#include "httplib.h"

#include "dascore/backend/protocol.hpp"
#include "dascore/core/error.hpp"
#include "dascore/sim/sim.hpp"

namespace dascore::sim {

/// Serves a SimBackend over HTTP on a background thread.
class SimServer {
 public:
  explicit SimServer(std::shared_ptr<SimBackend> backend) : backend_(std::move(backend)) {
    for (auto endpoint : {backend::kDecomposeEndpoint, backend::kVqaEndpoint, backend::kGenerateEndpoint,
                          backend::kSimRegisterEndpoint}) {
      const std::string path(endpoint);
      server_.Post(path, [this, path](const httplib::Request& req, httplib::Response& res) {
        Reply reply;
        try {
          reply = backend_->handle(path, Json::parse(req.body));
        } catch (const Json::parse_error& e) {
          reply = {400, backend::error_body(std::string("request body is not valid JSON: ") + e.what(), "/")};
        }
        res.status = reply.status;
        res.set_content(canonical(reply.body), "application/json");
      });
    }
  }

  SimServer(const SimServer&) = delete;
  SimServer& operator=(const SimServer&) = delete;

  ~SimServer() { stop(); }

  /// Binds `host:port` (port 0 picks a free one) and starts serving.
  /// Returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0) {
    port_ = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (port_ < 0) throw IoError("cannot bind simulator server to " + host + ":" + std::to_string(port));
    host_ = host;
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port_;
  }

  /// Blocks the calling thread serving requests.
  void listen(const std::string& host, int port) {
    if (!server_.listen(host, port)) throw IoError("cannot listen on " + host + ":" + std::to_string(port));
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const noexcept { return port_; }
  std::string base_url() const { return "http://" + host_ + ":" + std::to_string(port_); }
  const std::shared_ptr<SimBackend>& backend() const noexcept { return backend_; }

 private:
  std::shared_ptr<SimBackend> backend_;
  httplib::Server server_;
  std::thread thread_;
  std::string host_ = "127.0.0.1";
  int port_ = -1;
};

}  // namespace dascore::sim
