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

// Wire schemas shared by the engine and by backends (the simulator here, the
// model adapter elsewhere). Version "1":
//
//   POST /v1/decompose {prompt, schema_version:"1", exemplars?, task_description?,
//                       output_schema?, messages?}
//     -> {text}
//   POST /v1/vqa       {question, image_b64 | image_ref, media_type?}
//     -> {yes_logit, no_logit} | {yes_prob}
//   POST /v1/generate  {prompt, sub_prompts:[{text, weight}],
//                       attention_targets:[{token, gain}], seed, num_steps,
//                       guidance_scale, width, height, attn_step_size,
//                       attn_update_steps, mode}
//     -> {image_b64 | image_ref, media_type?, metadata}
//
// Errors are any non-2xx status with body {error, field?}.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dascore/core/error.hpp"
#include "dascore/core/image.hpp"
#include "dascore/core/json.hpp"
#include "dascore/core/types.hpp"

namespace dascore::backend {

inline constexpr std::string_view kSchemaVersion = "1";

// --- vqa ----------------------------------------------------------------------

struct VqaWireRequest {
  std::string question;
  std::optional<std::string> image_b64;
  std::optional<std::string> image_ref;
  std::string media_type;
};

inline Json to_json(const VqaWireRequest& r) {
  Json j{{"question", r.question}};
  if (r.image_b64) j["image_b64"] = *r.image_b64;
  if (r.image_ref) j["image_ref"] = *r.image_ref;
  if (!r.media_type.empty()) j["media_type"] = r.media_type;
  return j;
}

inline VqaWireRequest vqa_request_from_json(const Json& j) {
  using namespace json_detail;
  VqaWireRequest r;
  r.question = string_at(j, "question", "");
  const bool has_b64 = j.is_object() && j.contains("image_b64");
  const bool has_ref = j.is_object() && j.contains("image_ref");
  if (has_b64 == has_ref) throw ParseError("exactly one of image_b64 or image_ref is required", "/image_b64");
  if (has_b64) r.image_b64 = string_at(j, "image_b64", "");
  if (has_ref) {
    r.image_ref = string_at(j, "image_ref", "");
    if (!util::is_sha256_hex(*r.image_ref)) throw ParseError("expected a SHA-256 hex digest", "/image_ref");
  }
  if (j.contains("media_type")) r.media_type = string_at(j, "media_type", "", true);
  return r;
}

/// Backends may answer with raw logits or with p(yes) alone. A probability
/// is mapped to logits (ln p, ln(1 - p)) with p clamped to [1e-6, 1 - 1e-6],
/// so the temperature then acts on the log-odds.
inline VqaLogits vqa_logits_from_response(const Json& j) {
  using namespace json_detail;
  if (!j.is_object()) throw ProtocolError("VQA response must be a JSON object");
  try {
    if (j.contains("yes_logit") || j.contains("no_logit")) {
      return VqaLogits{number_at(j, "yes_logit", ""), number_at(j, "no_logit", "")};
    }
    if (j.contains("yes_prob")) {
      double p = number_at(j, "yes_prob", "");
      if (p < 0.0 || p > 1.0) throw ProtocolError("yes_prob must lie in [0, 1]");
      p = std::clamp(p, 1e-6, 1.0 - 1e-6);
      return VqaLogits{std::log(p), std::log1p(-p)};
    }
  } catch (const ParseError& e) {
    throw ProtocolError(std::string("malformed VQA response: ") + e.what());
  }
  throw ProtocolError("VQA response carries neither logits nor yes_prob");
}

// --- generate -------------------------------------------------------------------

struct WeightedSubPrompt {
  std::string text;
  double weight = 1.0;

  friend bool operator==(const WeightedSubPrompt&, const WeightedSubPrompt&) = default;
};

struct AttentionTarget {
  std::string token;
  double gain = 0.0;

  friend bool operator==(const AttentionTarget&, const AttentionTarget&) = default;
};

struct GenerationRequest {
  std::string prompt;
  std::vector<WeightedSubPrompt> sub_prompts;
  std::vector<AttentionTarget> attention_targets;
  GenerationDefaults defaults;
  Mode mode = Mode::kPWCA;

  friend bool operator==(const GenerationRequest&, const GenerationRequest&) = default;
};

inline Json to_json(const GenerationRequest& r) {
  Json sub = Json::array();
  for (const auto& s : r.sub_prompts) sub.push_back(Json{{"text", s.text}, {"weight", s.weight}});
  Json targets = Json::array();
  for (const auto& t : r.attention_targets) targets.push_back(Json{{"token", t.token}, {"gain", t.gain}});
  return Json{{"prompt", r.prompt},
              {"sub_prompts", std::move(sub)},
              {"attention_targets", std::move(targets)},
              {"seed", r.defaults.seed},
              {"num_steps", r.defaults.num_steps},
              {"guidance_scale", r.defaults.guidance_scale},
              {"width", r.defaults.resolution.width},
              {"height", r.defaults.resolution.height},
              {"attn_step_size", r.defaults.attn_step_size},
              {"attn_update_steps", r.defaults.attn_update_steps},
              {"mode", std::string(to_string(r.mode))}};
}

inline void validate(const GenerationRequest& r) {
  require(!detail::trim(r.prompt).empty(), "prompt must be non-empty");
  require(!r.sub_prompts.empty(), "at least one sub-prompt is required");
  require(r.sub_prompts.size() == r.attention_targets.size(),
          "sub_prompts and attention_targets must have equal length");
  for (const auto& s : r.sub_prompts) {
    require(!s.text.empty(), "sub-prompt text must be non-empty");
    require(std::isfinite(s.weight) && s.weight >= 1.0, "sub-prompt weights must be >= 1");
  }
  for (const auto& t : r.attention_targets) {
    require(!t.token.empty(), "attention token must be non-empty");
    require(std::isfinite(t.gain) && t.gain >= 0.0, "attention gains must be >= 0");
    if (r.mode == Mode::kPW) require(t.gain == 0.0, "PW mode requires all attention gains to be 0");
  }
  validate(r.defaults);
}

inline GenerationRequest generate_request_from_json(const Json& j) {
  using namespace json_detail;
  GenerationRequest r;
  r.prompt = string_at(j, "prompt", "");
  const Json& sub = member(j, "sub_prompts", "");
  if (!sub.is_array()) throw ParseError("expected an array", "/sub_prompts");
  for (std::size_t i = 0; i < sub.size(); ++i) {
    const std::string at = "/sub_prompts/" + std::to_string(i);
    r.sub_prompts.push_back({string_at(sub[i], "text", at), number_at(sub[i], "weight", at)});
  }
  const Json& targets = member(j, "attention_targets", "");
  if (!targets.is_array()) throw ParseError("expected an array", "/attention_targets");
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const std::string at = "/attention_targets/" + std::to_string(i);
    r.attention_targets.push_back({string_at(targets[i], "token", at), number_at(targets[i], "gain", at)});
  }
  auto integer = [&](const char* key) {
    const Json& v = member(j, key, "");
    if (!v.is_number_integer()) throw ParseError("expected an integer", std::string("/") + key);
    return v;
  };
  r.defaults.seed = integer("seed").get<std::uint64_t>();
  r.defaults.num_steps = integer("num_steps").get<int>();
  r.defaults.guidance_scale = number_at(j, "guidance_scale", "");
  r.defaults.resolution.width = integer("width").get<int>();
  r.defaults.resolution.height = integer("height").get<int>();
  r.defaults.attn_step_size = number_at(j, "attn_step_size", "");
  r.defaults.attn_update_steps = integer("attn_update_steps").get<int>();
  try {
    r.mode = parse_mode(string_at(j, "mode", ""));
  } catch (const InvalidArgument& e) {
    throw ParseError(e.what(), "/mode");
  }
  try {
    validate(r);
  } catch (const InvalidArgument& e) {
    throw ParseError(e.what(), "/");
  }
  return r;
}

struct GenerateWireResponse {
  std::optional<std::string> image_b64;
  std::optional<std::string> image_ref;
  std::string media_type;
  std::map<std::string, std::string> metadata;
};

inline Json to_json(const GenerateWireResponse& r) {
  Json j{{"metadata", r.metadata}};
  if (r.image_b64) j["image_b64"] = *r.image_b64;
  if (r.image_ref) j["image_ref"] = *r.image_ref;
  if (!r.media_type.empty()) j["media_type"] = r.media_type;
  return j;
}

inline GenerateWireResponse generate_response_from_json(const Json& j) {
  using namespace json_detail;
  GenerateWireResponse r;
  try {
    if (!j.is_object()) throw ParseError("expected an object", "/");
    if (j.contains("image_b64")) r.image_b64 = string_at(j, "image_b64", "");
    if (j.contains("image_ref")) r.image_ref = string_at(j, "image_ref", "");
    if (!r.image_b64 && !r.image_ref) throw ParseError("response carries no image", "/image_b64");
    if (j.contains("media_type")) r.media_type = string_at(j, "media_type", "", true);
    if (j.contains("metadata")) {
      const Json& meta = j.at("metadata");
      if (!meta.is_object()) throw ParseError("expected an object", "/metadata");
      for (const auto& [key, value] : meta.items()) {
        r.metadata[key] = value.is_string() ? value.get<std::string>() : value.dump();
      }
    }
  } catch (const ParseError& e) {
    throw ProtocolError(std::string("malformed generate response: ") + e.what());
  }
  return r;
}

// --- decompose ------------------------------------------------------------------

inline std::string decompose_text_from_response(const Json& j) {
  if (!j.is_object() || !j.contains("text") || !j["text"].is_string()) {
    throw ProtocolError("decompose response must be an object with a string 'text'");
  }
  return j["text"].get<std::string>();
}

// --- errors ---------------------------------------------------------------------

inline Json error_body(std::string_view message, std::string_view field = {}) {
  Json j{{"error", std::string(message)}};
  if (!field.empty()) j["field"] = std::string(field);
  return j;
}

}  // namespace dascore::backend
