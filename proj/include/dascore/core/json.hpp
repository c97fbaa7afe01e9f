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

// JSON forms of the domain types. Objects use nlohmann::json's default
// std::map storage, so keys serialize sorted; `canonical` adds no
// whitespace and numbers print as shortest round-trip decimals. The same
// value therefore always produces the same bytes and the same hash.

#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dascore/core/error.hpp"
#include "dascore/core/image.hpp"
#include "dascore/core/types.hpp"
#include "dascore/util/digest.hpp"

namespace dascore {

using Json = nlohmann::json;

inline std::string canonical(const Json& value) { return value.dump(); }

inline std::string canonical_hash(const Json& value) { return util::sha256_hex(canonical(value)); }

inline Json parse_json(std::string_view text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("malformed JSON (") + e.what() + ")",
                     std::string(text.substr(0, 80)));
  }
}

namespace json_detail {

inline std::string child(std::string_view path, std::string_view key) {
  return std::string(path) + "/" + std::string(key);
}

inline const Json& member(const Json& object, std::string_view key, std::string_view path) {
  if (!object.is_object()) throw ParseError("expected an object", std::string(path.empty() ? "/" : path));
  auto it = object.find(std::string(key));
  if (it == object.end()) throw ParseError("missing field", child(path, key));
  return *it;
}

inline std::string string_at(const Json& object, std::string_view key, std::string_view path,
                             bool allow_empty = false) {
  const Json& value = member(object, key, path);
  if (!value.is_string()) throw ParseError("expected a string", child(path, key));
  auto text = value.get<std::string>();
  if (!allow_empty && detail::trim(text).empty()) {
    throw ParseError("expected a non-empty string", child(path, key));
  }
  return text;
}

inline double number_at(const Json& object, std::string_view key, std::string_view path) {
  const Json& value = member(object, key, path);
  if (!value.is_number()) throw ParseError("expected a number", child(path, key));
  const double x = value.get<double>();
  if (!std::isfinite(x)) throw ParseError("expected a finite number", child(path, key));
  return x;
}

inline std::vector<double> numbers_at(const Json& object, std::string_view key,
                                      std::string_view path) {
  const Json& value = member(object, key, path);
  if (!value.is_array()) throw ParseError("expected an array", child(path, key));
  std::vector<double> out;
  out.reserve(value.size());
  for (std::size_t i = 0; i < value.size(); ++i) {
    if (!value[i].is_number()) {
      throw ParseError("expected a number", child(path, key) + "/" + std::to_string(i));
    }
    out.push_back(value[i].get<double>());
  }
  return out;
}

}  // namespace json_detail

// --- Assertion / Decomposition ---------------------------------------------

inline Json to_json(const Assertion& a) {
  return Json{{"index", a.index},
              {"assertion", a.assertion_text},
              {"sub_prompt", a.sub_prompt},
              {"question", a.question},
              {"subject", a.subject_token}};
}

inline Json to_json(const Decomposition& d) {
  Json assertions = Json::array();
  for (const auto& a : d.assertions) assertions.push_back(to_json(a));
  return Json{{"prompt", d.prompt.text()},
              {"source", std::string(to_string(d.source))},
              {"assertions", std::move(assertions)}};
}

inline Decomposition decomposition_from_json(const Json& j, std::string_view path = "") {
  using namespace json_detail;
  Prompt prompt(string_at(j, "prompt", path));
  DecompositionSource source = DecompositionSource::kManual;
  if (j.contains("source")) {
    try {
      source = parse_source(string_at(j, "source", path));
    } catch (const InvalidArgument& e) {
      throw ParseError(e.what(), child(path, "source"));
    }
  }
  const Json& list = member(j, "assertions", path);
  if (!list.is_array() || list.empty()) {
    throw ParseError("expected a non-empty array", child(path, "assertions"));
  }
  Decomposition d{std::move(prompt), {}, source};
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string at = child(path, "assertions") + "/" + std::to_string(i);
    Assertion a;
    a.index = i;
    a.assertion_text = string_at(list[i], "assertion", at);
    a.sub_prompt = string_at(list[i], "sub_prompt", at);
    a.question = string_at(list[i], "question", at);
    a.subject_token = string_at(list[i], "subject", at);
    if (list[i].contains("index") && list[i]["index"] != i) {
      throw ParseError("assertion indices must be 0..n-1 in order", at + "/index");
    }
    try {
      validate(a);
    } catch (const InvalidArgument& e) {
      throw ParseError(e.what(), at);
    }
    d.assertions.push_back(std::move(a));
  }
  return d;
}

// --- Scores and reports -------------------------------------------------------

inline Json to_json(const VqaLogits& l) {
  return Json{{"yes_logit", l.yes_logit}, {"no_logit", l.no_logit}};
}

inline Json to_json(const AlignmentReport& r) {
  Json logits = Json::array();
  for (const auto& l : r.logits) logits.push_back(to_json(l));
  Json scores = Json::array();
  for (const auto& s : r.scores) scores.push_back(s.value());
  return Json{{"logits", std::move(logits)},
              {"scores", std::move(scores)},
              {"lambdas", r.lambdas},
              {"overall", r.overall}};
}

inline AlignmentReport report_from_json(const Json& j, std::string_view path = "") {
  using namespace json_detail;
  AlignmentReport r;
  for (double s : numbers_at(j, "scores", path)) r.scores.emplace_back(s);
  r.lambdas = numbers_at(j, "lambdas", path);
  r.overall = number_at(j, "overall", path);
  if (j.contains("logits")) {
    const Json& list = j.at("logits");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string at = child(path, "logits") + "/" + std::to_string(i);
      r.logits.push_back({number_at(list[i], "yes_logit", at), number_at(list[i], "no_logit", at)});
    }
  }
  return r;
}

// --- Weights and configuration -----------------------------------------------

inline Json to_json(const WeightState& s) {
  return Json{{"prompt_weights", s.prompt_weights}, {"attention_gains", s.attention_gains}};
}

inline WeightState weight_state_from_json(const Json& j, std::string_view path = "") {
  using namespace json_detail;
  return WeightState{numbers_at(j, "prompt_weights", path),
                     numbers_at(j, "attention_gains", path)};
}

inline Json to_json(const ImageRef& image) {
  return Json{{"sha256", image.sha256()}, {"media_type", image.media_type()}};
}

inline ImageRef image_ref_from_json(const Json& j, std::string_view path = "") {
  using namespace json_detail;
  const auto hash = string_at(j, "sha256", path);
  if (!util::is_sha256_hex(hash)) throw ParseError("expected a SHA-256 hex digest", child(path, "sha256"));
  std::string media_type;
  if (j.contains("media_type")) media_type = string_at(j, "media_type", path, true);
  return ImageRef::from_hash(hash, media_type);
}

inline Json to_json(const GenerationDefaults& g) {
  return Json{{"num_steps", g.num_steps},
              {"guidance_scale", g.guidance_scale},
              {"width", g.resolution.width},
              {"height", g.resolution.height},
              {"attn_step_size", g.attn_step_size},
              {"attn_update_steps", g.attn_update_steps},
              {"seed", g.seed}};
}

inline Json to_json(const RefinementConfig& c) {
  return Json{{"max_iterations", c.max_iterations},
              {"threshold", c.threshold},
              {"delta_w", c.delta_w},
              {"delta_gamma", c.delta_gamma},
              {"tau", c.tau},
              {"mode", std::string(to_string(c.mode))},
              {"generation", to_json(c.generation)}};
}

/// Applies the keys present in `overrides` on top of `base`. Unknown keys are
/// rejected so that typos surface as errors.
inline RefinementConfig apply_overrides(RefinementConfig base, const Json& overrides,
                                        std::string_view path = "") {
  using namespace json_detail;
  if (overrides.is_null()) return base;
  if (!overrides.is_object()) throw ParseError("expected an object", std::string(path.empty() ? "/" : path));
  auto as_int = [&](const std::string& key) {
    const Json& v = overrides.at(key);
    if (!v.is_number_integer()) throw ParseError("expected an integer", child(path, key));
    return v.get<long long>();
  };
  for (const auto& [key, value] : overrides.items()) {
    if (key == "max_iterations" || key == "k") {
      base.max_iterations = static_cast<int>(as_int(key));
    } else if (key == "threshold") {
      base.threshold = number_at(overrides, key, path);
    } else if (key == "delta_w") {
      base.delta_w = number_at(overrides, key, path);
    } else if (key == "delta_gamma") {
      base.delta_gamma = number_at(overrides, key, path);
    } else if (key == "tau") {
      base.tau = number_at(overrides, key, path);
    } else if (key == "mode") {
      try {
        base.mode = parse_mode(string_at(overrides, key, path));
      } catch (const InvalidArgument& e) {
        throw ParseError(e.what(), child(path, key));
      }
    } else if (key == "seed") {
      if (!value.is_number_unsigned() && !value.is_number_integer()) {
        throw ParseError("expected an integer", child(path, key));
      }
      base.generation.seed = value.get<std::uint64_t>();
    } else if (key == "num_steps") {
      base.generation.num_steps = static_cast<int>(as_int(key));
    } else if (key == "guidance_scale") {
      base.generation.guidance_scale = number_at(overrides, key, path);
    } else if (key == "width") {
      base.generation.resolution.width = static_cast<int>(as_int(key));
    } else if (key == "height") {
      base.generation.resolution.height = static_cast<int>(as_int(key));
    } else if (key == "attn_step_size") {
      base.generation.attn_step_size = number_at(overrides, key, path);
    } else if (key == "attn_update_steps") {
      base.generation.attn_update_steps = static_cast<int>(as_int(key));
    } else {
      throw ParseError("unknown configuration key", child(path, key));
    }
  }
  try {
    validate(base);
  } catch (const InvalidArgument& e) {
    throw ParseError(e.what(), std::string(path.empty() ? "/" : path));
  }
  return base;
}

}  // namespace dascore
