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

// Operator HTTP API.
//
//   POST /evaluate  {prompt, image_b64, media_type?, decomposition?, lambdas?, tau?}
//                   -> AlignmentReport
//   POST /refine    {prompt, overrides?, lambdas?}
//                   -> RefinementOutcome, session id in X-Session-Id
//   GET  /runs/{id} -> ledger entries of one session
//   GET  /healthz   -> "ok"
//
// Every response carries X-Request-Id (echoed when the caller sent one).
// Errors are {error, field?} with 400 for bad input, 401 for a missing or
// wrong bearer token, 404 for an unknown run, and 502 when a backend fails.

#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "httplib.h"

#include "dascore/backend/protocol.hpp"
#include "dascore/core/error.hpp"
#include "dascore/core/json.hpp"
#include "dascore/refine/refine.hpp"
#include "dascore/service/engine.hpp"
#include "dascore/util/digest.hpp"

namespace dascore::service {

struct ApiOptions {
  std::string bearer_token;  // empty: no auth
};

struct ApiReply {
  ApiReply(int status_code, std::string body_text, std::string type = "application/json")
      : status(status_code), body(std::move(body_text)), content_type(std::move(type)) {}

  int status;
  std::string body;
  std::string content_type;
  std::string session_id;
};

/// Request handling without sockets, so tests can drive it directly and
/// the server stays a thin shell.
class Api {
 public:
  Api(std::shared_ptr<Engine> engine, ApiOptions options = {})
      : engine_(std::move(engine)), options_(std::move(options)) {
    require(engine_ != nullptr, "api needs an engine");
  }

  bool authorized(const std::string& authorization_header) const {
    return options_.bearer_token.empty() || authorization_header == "Bearer " + options_.bearer_token;
  }

  ApiReply healthz() const { return ApiReply(200, "ok", "text/plain"); }

  ApiReply evaluate(const std::string& body) const {
    return guarded([&] {
      using namespace json_detail;
      const Json j = parse_body(body);
      const Prompt prompt = prompt_at(j);
      std::string bytes;
      try {
        bytes = util::base64_decode(string_at(j, "image_b64", ""));
      } catch (const InvalidArgument& e) {
        throw ParseError(e.what(), "/image_b64");
      }
      if (bytes.empty()) throw ParseError("image is empty", "/image_b64");
      const std::string media = j.contains("media_type") ? string_at(j, "media_type", "") : "";
      std::optional<Decomposition> decomposition;
      if (j.contains("decomposition")) decomposition = decomposition_from_json(j["decomposition"], "/decomposition");
      std::optional<std::vector<double>> lambdas;
      if (j.contains("lambdas")) lambdas = numbers_at(j, "lambdas", "");
      std::optional<double> tau;
      if (j.contains("tau")) tau = number_at(j, "tau", "");
      const auto report = engine_->evaluate(prompt, ImageRef::from_bytes(std::move(bytes), media), decomposition,
                                            lambdas, tau, new_session_id());
      return ApiReply{200, canonical(to_json(report))};
    });
  }

  ApiReply refine(const std::string& body) const {
    const std::string session = new_session_id();
    ApiReply reply = guarded([&] {
      using namespace json_detail;
      const Json j = parse_body(body);
      const Prompt prompt = prompt_at(j);
      RefinementConfig cfg = engine_->config().refinement;
      if (j.contains("overrides")) cfg = apply_overrides(cfg, j["overrides"], "/overrides");
      std::optional<std::vector<double>> lambdas;
      if (j.contains("lambdas")) lambdas = numbers_at(j, "lambdas", "");
      const auto outcome = engine_->refine(prompt, cfg, lambdas, session);
      return ApiReply{200, canonical(refine::to_json(outcome))};
    });
    reply.session_id = session;
    return reply;
  }

  ApiReply run(const std::string& session_id) const {
    return guarded([&] {
      Json entries = Json::array();
      for (const auto& e : engine_->session(session_id)) entries.push_back(store::to_json(e));
      if (entries.empty()) return ApiReply{404, canonical(backend::error_body("unknown session " + session_id))};
      return ApiReply{200, canonical(entries)};
    });
  }

 private:
  static Json parse_body(const std::string& body) {
    try {
      return Json::parse(body);
    } catch (const Json::parse_error& e) {
      throw ParseError(std::string("request body is not valid JSON: ") + e.what(), "/");
    }
  }

  static Prompt prompt_at(const Json& j) { return Prompt(json_detail::string_at(j, "prompt", "")); }

  template <typename F>
  static ApiReply guarded(F&& handler) {
    auto fail = [](int status, std::string_view message, std::string_view field = {}) {
      return ApiReply{status, canonical(backend::error_body(message, field))};
    };
    try {
      return handler();
    } catch (const ParseError& e) {
      return fail(400, e.what(), e.span());
    } catch (const refine::RefinementError& e) {
      Json body = backend::error_body(e.what());
      Json trace = Json::array();
      for (const auto& r : e.trace()) trace.push_back(refine::to_json(r));
      body["trace"] = std::move(trace);
      const bool backend_fault = e.code() == ErrorCode::kTransport || e.code() == ErrorCode::kProtocol;
      return ApiReply{backend_fault ? 502 : 500, canonical(body)};
    } catch (const TransportError& e) {
      return fail(502, e.what());
    } catch (const ProtocolError& e) {
      return fail(502, e.what());
    } catch (const InvalidArgument& e) {
      return fail(400, e.what());
    } catch (const Error& e) {
      return fail(500, e.what());
    }
  }

  std::shared_ptr<Engine> engine_;
  ApiOptions options_;
};

/// httplib shell around Api.
class ApiServer {
 public:
  ApiServer(std::shared_ptr<Engine> engine, ApiOptions options = {}) : api_(std::move(engine), std::move(options)) {
    server_.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
      res.set_header("X-Request-Id", req.has_header("X-Request-Id") ? req.get_header_value("X-Request-Id")
                                                                    : new_session_id());
      if (req.path != "/healthz" && !api_.authorized(req.get_header_value("Authorization"))) {
        res.status = 401;
        res.set_content(canonical(backend::error_body("missing or invalid bearer token")), "application/json");
        return httplib::Server::HandlerResponse::Handled;
      }
      return httplib::Server::HandlerResponse::Unhandled;
    });
    server_.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) { send(res, api_.healthz()); });
    server_.Post("/evaluate",
                 [this](const httplib::Request& req, httplib::Response& res) { send(res, api_.evaluate(req.body)); });
    server_.Post("/refine",
                 [this](const httplib::Request& req, httplib::Response& res) { send(res, api_.refine(req.body)); });
    server_.Get(R"(/runs/([0-9A-Za-z_\-]+))", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, api_.run(req.matches[1]));
    });
    server_.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
      if (res.body.empty()) {
        res.set_content(canonical(backend::error_body("no route for " + req.method + " " + req.path)),
                        "application/json");
      }
    });
  }

  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;
  ~ApiServer() { stop(); }

  int start(const std::string& host = "127.0.0.1", int port = 0) {
    port_ = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (port_ < 0) throw IoError("cannot bind api server to " + host + ":" + std::to_string(port));
    host_ = host;
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port_;
  }

  void listen(const std::string& host, int port) {
    if (!server_.listen(host, port)) throw IoError("cannot listen on " + host + ":" + std::to_string(port));
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const noexcept { return port_; }
  std::string base_url() const { return "http://" + host_ + ":" + std::to_string(port_); }

 private:
  static void send(httplib::Response& res, const ApiReply& reply) {
    res.status = reply.status;
    if (!reply.session_id.empty()) res.set_header("X-Session-Id", reply.session_id);
    res.set_content(reply.body, reply.content_type);
  }

  Api api_;
  httplib::Server server_;
  std::thread thread_;
  std::string host_ = "127.0.0.1";
  int port_ = -1;
};

/// Splits "host:port" (or ":port") for --listen.
inline std::pair<std::string, int> parse_listen(std::string_view spec) {
  const auto colon = spec.rfind(':');
  require(colon != std::string_view::npos, "listen address must be host:port");
  std::string host(spec.substr(0, colon));
  if (host.empty()) host = "127.0.0.1";
  const std::string port_text(spec.substr(colon + 1));
  int port = 0;
  try {
    std::size_t used = 0;
    port = std::stoi(port_text, &used);
    require(used == port_text.size(), "listen port must be a number");
  } catch (const std::logic_error&) {
    throw InvalidArgument("listen port must be a number (got '" + port_text + "')");
  }
  require(port >= 0 && port <= 65535, "listen port must lie in 0..65535");
  return {host, port};
}

}  // namespace dascore::service
