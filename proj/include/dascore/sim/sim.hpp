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

// Deterministic stand-in for all three model backends.
//
// Each assertion i of a registered prompt has a base expressivity b_i in
// [-2, 2] derived from hash(world seed, i, prompt). An image generated with
// weights w and gains gamma expresses assertion i to the degree
//
//   e_i = logistic(b_i + c_w (w_i - 1) + c_gamma gamma_i - kappa sum_{j != i} (w_j - 1))
//
// and the simulated VQA answers yes = s e_i, no = s (1 - e_i). With kappa = 0
// raising w_i or gamma_i raises only u_i; kappa > 0 lets boosting one
// assertion suppress the others.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dascore/backend/protocol.hpp"
#include "dascore/backend/transport.hpp"
#include "dascore/core/error.hpp"
#include "dascore/core/json.hpp"
#include "dascore/core/score.hpp"
#include "dascore/core/types.hpp"
#include "dascore/decompose/decompose.hpp"
#include "dascore/util/digest.hpp"

namespace dascore::sim {

inline constexpr std::string_view kMediaType = "application/x-dascore-sim-image";
inline constexpr std::string_view kTokenMagic = "dascore-sim-image/1\n";
inline constexpr std::string_view kModelId = "dascore-sim/1";

struct Coefficients {
  double c_w = 2.0;
  double c_gamma = 0.3;
  double kappa = 0.0;
  double logit_scale = 5.0;
};

struct SimWorld {
  std::uint64_t seed = 0;
  std::string prompt;
  std::vector<std::string> questions;
  std::vector<double> base;
  Coefficients coeff;

  std::size_t size() const noexcept { return base.size(); }
};

/// b_i in [-2, 2], a pure function of (seed, index, prompt).
inline double base_expressivity(std::uint64_t seed, std::size_t index, std::string_view prompt) {
  const std::string key = std::to_string(seed) + '\x1f' + std::to_string(index) + '\x1f' + std::string(prompt);
  const double unit = static_cast<double>(util::sha256_u64(key) >> 11) * 0x1.0p-53;
  return -2.0 + 4.0 * unit;
}

inline SimWorld make_world(std::uint64_t seed, const Decomposition& decomposition, Coefficients coeff = {},
                           std::optional<std::vector<double>> base = std::nullopt) {
  validate(decomposition);
  require(coeff.kappa >= 0.0, "interference kappa must be >= 0");
  SimWorld world;
  world.seed = seed;
  world.prompt = decomposition.prompt.text();
  world.coeff = coeff;
  for (const auto& a : decomposition.assertions) world.questions.push_back(a.question);
  if (base) {
    require(base->size() == decomposition.size(), "base expressivity needs one entry per assertion");
    world.base = std::move(*base);
  } else {
    for (std::size_t i = 0; i < decomposition.size(); ++i) {
      world.base.push_back(base_expressivity(seed, i, world.prompt));
    }
  }
  return world;
}

inline double sim_expression(const SimWorld& world, std::size_t index, std::span<const double> w,
                             std::span<const double> gamma) {
  require(index < world.size(), "assertion index out of range");
  require(w.size() == world.size() && gamma.size() == world.size(), "weight vectors must match the world size");
  double interference = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) {
    if (j != index) interference += w[j] - 1.0;
  }
  const double x = world.base[index] + world.coeff.c_w * (w[index] - 1.0) + world.coeff.c_gamma * gamma[index] -
                   world.coeff.kappa * interference;
  return logistic(x);
}

/// u for an expression level e under the simulated VQA.
inline double sim_alignment(double e, const Coefficients& coeff, double tau) {
  return assertion_alignment(VqaLogits{coeff.logit_scale * e, coeff.logit_scale * (1.0 - e)}, tau).value();
}

/// Base expressivities for an n-assertion world that refinement under `cfg`
/// provably solves within its budget (needs kappa = 0 and unit lambdas).
///
/// Every assertion except `hard` gets b in [1, 2], so its u sits above the
/// threshold for good. `hard` gets the smallest b such that after K-1
/// increments of its prompt weight alone (attention gain ignored, so the
/// bound holds in both modes) the overall score clears the threshold.
/// Until that happens `hard` is the least aligned assertion, so every
/// increment lands on it.
inline std::vector<double> solvable_base(std::uint64_t seed, std::size_t n, std::size_t hard,
                                         const Coefficients& coeff, const RefinementConfig& cfg,
                                         double margin = 1e-3) {
  require(n >= 1 && hard < n, "hard index must name one of the n assertions");
  require(coeff.kappa == 0.0, "solvable worlds need kappa = 0");
  std::vector<double> base(n);
  double others = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == hard) continue;
    base[j] = 1.0 + (base_expressivity(seed, j, "solvable") + 2.0) / 4.0;
    const double u = sim_alignment(logistic(base[j]), coeff, cfg.tau);
    require(u >= cfg.threshold, "easy assertions would not clear the threshold on their own");
    others += u;
  }
  const double needed = std::max(cfg.threshold * static_cast<double>(n) - others + margin, 0.05);
  require(needed < 1.0, "no hard-assertion score can lift the overall score to the threshold");
  // Invert u = logistic(s (2e - 1) / tau) for e, then e = logistic(b + shift) for b.
  const double e = 0.5 * (1.0 + cfg.tau * std::log(needed / (1.0 - needed)) / coeff.logit_scale);
  require(e > 0.0 && e < 1.0, "required expression level is out of reach for this logit scale");
  const double shift = coeff.c_w * cfg.delta_w * static_cast<double>(cfg.max_iterations - 1);
  const double b = std::log(e / (1.0 - e)) - shift;
  require(b <= 2.0, "hard assertion would need b > 2");
  base[hard] = std::max(b, -2.0);
  return base;
}

/// The simulated "image": a self-describing record of the parameters it was
/// generated with.
struct SimImage {
  std::uint64_t seed = 0;
  std::string prompt;
  std::vector<double> weights;
  std::vector<double> gains;

  friend bool operator==(const SimImage&, const SimImage&) = default;
};

inline std::string encode_token(const SimImage& image) {
  Json j{{"seed", image.seed}, {"prompt", image.prompt}, {"w", image.weights}, {"gamma", image.gains}};
  return std::string(kTokenMagic) + canonical(j);
}

inline SimImage decode_token(std::string_view bytes) {
  if (bytes.substr(0, kTokenMagic.size()) != kTokenMagic) {
    throw ProtocolError("image is not a simulator image", 400);
  }
  try {
    const Json j = Json::parse(bytes.substr(kTokenMagic.size()));
    SimImage image;
    image.seed = j.at("seed").get<std::uint64_t>();
    image.prompt = j.at("prompt").get<std::string>();
    image.weights = j.at("w").get<std::vector<double>>();
    image.gains = j.at("gamma").get<std::vector<double>>();
    if (image.weights.size() != image.gains.size()) throw ProtocolError("simulator image is inconsistent", 400);
    return image;
  } catch (const Json::exception& e) {
    throw ProtocolError(std::string("simulator image is corrupt: ") + e.what(), 400);
  }
}

inline SimImage sim_generate(const backend::GenerationRequest& request) {
  backend::validate(request);
  SimImage image;
  image.seed = request.defaults.seed;
  image.prompt = request.prompt;
  for (const auto& s : request.sub_prompts) image.weights.push_back(s.weight);
  for (const auto& t : request.attention_targets) image.gains.push_back(t.gain);
  return image;
}

/// Logits for one question. The question must be one of the world's
/// assertion questions verbatim.
inline VqaLogits sim_vqa(const SimImage& image, std::string_view question, const SimWorld& world) {
  std::optional<std::size_t> index;
  for (std::size_t i = 0; i < world.questions.size(); ++i) {
    if (world.questions[i] == question) {
      index = i;
      break;
    }
  }
  if (!index) throw ProtocolError("simulator does not know the question '" + std::string(question) + "'", 422);
  if (image.weights.size() != world.size()) {
    throw ProtocolError("image was generated for a different decomposition of this prompt", 422);
  }
  const double e = sim_expression(world, *index, image.weights, image.gains);
  return VqaLogits{world.coeff.logit_scale * e, world.coeff.logit_scale * (1.0 - e)};
}

struct Reply {
  int status = 200;
  Json body;
};

/// All simulator endpoints behind one dispatch function, shared by the
/// in-process transport and the HTTP server so both speak the same bytes.
class SimBackend {
 public:
  explicit SimBackend(std::uint64_t world_seed = 0, Coefficients coeff = {})
      : world_seed_(world_seed), coeff_(coeff) {}

  /// Registers (or replaces) the world for a decomposition's prompt.
  void register_decomposition(const Decomposition& decomposition,
                              std::optional<std::vector<double>> base = std::nullopt) {
    auto world = make_world(world_seed_, decomposition, coeff_, std::move(base));
    std::unique_lock lock(mutex_);
    worlds_[world.prompt] = std::move(world);
  }

  std::optional<SimWorld> world(std::string_view prompt) const {
    std::shared_lock lock(mutex_);
    auto it = worlds_.find(std::string(prompt));
    if (it == worlds_.end()) return std::nullopt;
    return it->second;
  }

  Reply handle(std::string_view endpoint, const Json& body) {
    try {
      if (endpoint == backend::kGenerateEndpoint) return generate(body);
      if (endpoint == backend::kVqaEndpoint) return vqa(body);
      if (endpoint == backend::kDecomposeEndpoint) return decompose(body);
      if (endpoint == backend::kSimRegisterEndpoint) return register_endpoint(body);
      return {404, backend::error_body("unknown endpoint " + std::string(endpoint))};
    } catch (const ParseError& e) {
      return {400, backend::error_body(e.what(), e.span())};
    } catch (const ProtocolError& e) {
      return {e.status() ? e.status() : 422, backend::error_body(e.what())};
    } catch (const InvalidArgument& e) {
      return {400, backend::error_body(e.what())};
    }
  }

 private:
  Reply generate(const Json& body) {
    const auto request = backend::generate_request_from_json(body);
    const std::string bytes = encode_token(sim_generate(request));
    const std::string hash = util::sha256_hex(bytes);
    {
      std::unique_lock lock(mutex_);
      images_.try_emplace(hash, bytes);
    }
    backend::GenerateWireResponse reply;
    reply.image_b64 = util::base64_encode(bytes);
    reply.media_type = std::string(kMediaType);
    reply.metadata = {{"model", std::string(kModelId)}};
    return {200, backend::to_json(reply)};
  }

  Reply vqa(const Json& body) {
    const auto request = backend::vqa_request_from_json(body);
    std::string bytes;
    if (request.image_b64) {
      try {
        bytes = util::base64_decode(*request.image_b64);
      } catch (const InvalidArgument& e) {
        throw ParseError(e.what(), "/image_b64");
      }
    } else {
      std::shared_lock lock(mutex_);
      auto it = images_.find(*request.image_ref);
      if (it == images_.end()) throw ProtocolError("unknown image_ref " + *request.image_ref, 404);
      bytes = it->second;
    }
    const SimImage image = decode_token(bytes);
    const auto found = world(image.prompt);
    if (!found) throw ProtocolError("simulator has no decomposition registered for this prompt", 422);
    const VqaLogits logits = sim_vqa(image, request.question, *found);
    return {200, Json{{"yes_logit", logits.yes_logit}, {"no_logit", logits.no_logit}}};
  }

  Reply decompose(const Json& body) {
    using namespace json_detail;
    const Prompt prompt(string_at(body, "prompt", ""));
    if (string_at(body, "schema_version", "") != backend::kSchemaVersion) {
      throw ParseError("unsupported schema_version", "/schema_version");
    }
    const auto d = decompose::fallback_decompose(prompt);
    register_decomposition(d);
    return {200, Json{{"text", decompose::render_assertions(d)}}};
  }

  Reply register_endpoint(const Json& body) {
    using namespace json_detail;
    auto d = decomposition_from_json(member(body, "decomposition", ""), "/decomposition");
    std::optional<std::vector<double>> base;
    if (body.contains("base")) base = numbers_at(body, "base", "");
    register_decomposition(d, std::move(base));
    return {200, Json{{"registered", d.prompt.text()}, {"assertions", d.size()}}};
  }

  std::uint64_t world_seed_;
  Coefficients coeff_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, SimWorld, std::less<>> worlds_;
  std::map<std::string, std::string, std::less<>> images_;
};

/// In-process transport: requests never leave the process but go through
/// the same JSON bodies and error statuses as the HTTP server.
class SimTransport final : public backend::Transport {
 public:
  explicit SimTransport(std::shared_ptr<SimBackend> sim, std::string id = "sim")
      : sim_(std::move(sim)), id_(std::move(id)) {}

  std::string id() const override { return id_; }

  Json post(std::string_view endpoint, const Json& body) override {
    // Round-trip through bytes so both paths see identical JSON.
    Reply reply = sim_->handle(endpoint, Json::parse(canonical(body)));
    if (reply.status < 200 || reply.status >= 300) {
      const std::string message = reply.body.value("error", std::string("simulator error"));
      throw ProtocolError("backend " + id_ + std::string(endpoint) + " rejected request (" +
                              std::to_string(reply.status) + "): " + message,
                          reply.status);
    }
    return Json::parse(canonical(reply.body));
  }

  const std::shared_ptr<SimBackend>& backend() const noexcept { return sim_; }

 private:
  std::shared_ptr<SimBackend> sim_;
  std::string id_;
};

}  // namespace dascore::sim
