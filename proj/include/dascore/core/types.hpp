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

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dascore/core/error.hpp"

namespace dascore {

namespace detail {

inline std::string_view trim(std::string_view text) {
  constexpr std::string_view kSpace = " \t\r\n\f\v";
  const auto first = text.find_first_not_of(kSpace);
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(kSpace);
  return text.substr(first, last - first + 1);
}

}  // namespace detail

/// A text prompt. Always trimmed and non-empty.
class Prompt {
 public:
  explicit Prompt(std::string_view text) : text_(detail::trim(text)) {
    require(!text_.empty(), "prompt must be non-empty");
  }

  const std::string& text() const noexcept { return text_; }

  friend bool operator==(const Prompt&, const Prompt&) = default;

 private:
  std::string text_;
};

/// One assertion of a decomposed prompt: the declarative statement, the
/// prompt fragment it covers, its yes/no question form, and the noun subject
/// whose attention the generator may boost.
struct Assertion {
  std::size_t index = 0;
  std::string assertion_text;
  std::string sub_prompt;
  std::string question;
  std::string subject_token;

  friend bool operator==(const Assertion&, const Assertion&) = default;
};

enum class DecompositionSource { kLlm, kFallback, kManual };

inline std::string_view to_string(DecompositionSource source) {
  switch (source) {
    case DecompositionSource::kLlm: return "llm";
    case DecompositionSource::kFallback: return "fallback";
    case DecompositionSource::kManual: return "manual";
  }
  return "manual";
}

inline DecompositionSource parse_source(std::string_view text) {
  if (text == "llm") return DecompositionSource::kLlm;
  if (text == "fallback") return DecompositionSource::kFallback;
  if (text == "manual") return DecompositionSource::kManual;
  throw InvalidArgument("unknown decomposition source '" + std::string(text) + "'");
}

inline void validate(const Assertion& assertion) {
  require(!assertion.assertion_text.empty(), "assertion text must be non-empty");
  require(!assertion.sub_prompt.empty(), "sub_prompt must be non-empty");
  require(!assertion.question.empty(), "question must be non-empty");
  require(assertion.question.back() == '?', "question must end with '?'");
  require(!assertion.subject_token.empty(), "subject token must be non-empty");
}

struct Decomposition {
  Prompt prompt;
  std::vector<Assertion> assertions;
  DecompositionSource source = DecompositionSource::kManual;

  std::size_t size() const noexcept { return assertions.size(); }

  friend bool operator==(const Decomposition&, const Decomposition&) = default;
};

inline void validate(const Decomposition& decomposition) {
  require(!decomposition.assertions.empty(), "decomposition needs at least one assertion");
  for (std::size_t i = 0; i < decomposition.assertions.size(); ++i) {
    const auto& assertion = decomposition.assertions[i];
    require(assertion.index == i, "assertion indices must be 0..n-1 in order");
    validate(assertion);
  }
}

struct VqaLogits {
  double yes_logit = 0.0;
  double no_logit = 0.0;

  friend bool operator==(const VqaLogits&, const VqaLogits&) = default;
};

/// Assertion-level alignment u_i, always in [0, 1].
class AssertionScore {
 public:
  constexpr AssertionScore() = default;
  explicit AssertionScore(double value) : value_(value) {
    require(std::isfinite(value) && value >= 0.0 && value <= 1.0,
            "assertion score must lie in [0, 1]");
  }

  constexpr double value() const noexcept { return value_; }

  friend bool operator==(const AssertionScore&, const AssertionScore&) = default;

 private:
  double value_ = 0.0;
};

struct AlignmentReport {
  std::vector<VqaLogits> logits;
  std::vector<AssertionScore> scores;
  std::vector<double> lambdas;
  double overall = 0.0;

  friend bool operator==(const AlignmentReport&, const AlignmentReport&) = default;
};

/// Per-assertion prompt weights w_i (start at 1, only grow) and attention
/// gains gamma_i (start at 0, only grow).
struct WeightState {
  std::vector<double> prompt_weights;
  std::vector<double> attention_gains;

  static WeightState initial(std::size_t n) {
    return WeightState{std::vector<double>(n, 1.0), std::vector<double>(n, 0.0)};
  }

  std::size_t size() const noexcept { return prompt_weights.size(); }

  friend bool operator==(const WeightState&, const WeightState&) = default;
};

inline void validate(const WeightState& state) {
  require(state.prompt_weights.size() == state.attention_gains.size(),
          "weight and gain vectors must have equal length");
  for (double w : state.prompt_weights) {
    require(std::isfinite(w) && w >= 1.0, "prompt weights must be >= 1");
  }
  for (double g : state.attention_gains) {
    require(std::isfinite(g) && g >= 0.0, "attention gains must be >= 0");
  }
}

/// PW: prompt weighting only. PW_CA: prompt weighting plus cross-attention gain.
enum class Mode { kPW, kPWCA };

inline std::string_view to_string(Mode mode) {
  return mode == Mode::kPW ? "PW" : "PW_CA";
}

inline Mode parse_mode(std::string_view text) {
  if (text == "PW" || text == "pw") return Mode::kPW;
  if (text == "PW_CA" || text == "pw_ca" || text == "pw-ca") return Mode::kPWCA;
  throw InvalidArgument("unknown mode '" + std::string(text) + "' (expected PW or PW_CA)");
}

struct Resolution {
  int width = 512;
  int height = 512;

  friend bool operator==(const Resolution&, const Resolution&) = default;
};

struct GenerationDefaults {
  int num_steps = 50;
  double guidance_scale = 7.5;
  Resolution resolution;
  double attn_step_size = 10.0;
  int attn_update_steps = 20;
  std::uint64_t seed = 0;

  friend bool operator==(const GenerationDefaults&, const GenerationDefaults&) = default;
};

inline void validate(const GenerationDefaults& defaults) {
  require(defaults.num_steps >= 1, "num_steps must be >= 1");
  require(defaults.attn_update_steps >= 0, "attn_update_steps must be >= 0");
  require(defaults.attn_update_steps <= defaults.num_steps,
          "attn_update_steps must not exceed num_steps");
  require(defaults.resolution.width > 0 && defaults.resolution.height > 0,
          "resolution must be positive");
  require(std::isfinite(defaults.guidance_scale), "guidance_scale must be finite");
  require(std::isfinite(defaults.attn_step_size), "attn_step_size must be finite");
}

struct RefinementConfig {
  int max_iterations = 5;
  double threshold = 0.8;
  double delta_w = 0.1;
  double delta_gamma = 1.0;
  double tau = 0.9;
  Mode mode = Mode::kPWCA;
  GenerationDefaults generation;

  friend bool operator==(const RefinementConfig&, const RefinementConfig&) = default;
};

inline void validate(const RefinementConfig& cfg) {
  require(cfg.max_iterations >= 1, "max_iterations must be >= 1");
  require(cfg.threshold > 0.0 && cfg.threshold <= 1.0, "threshold must lie in (0, 1]");
  require(std::isfinite(cfg.delta_w) && cfg.delta_w > 0.0, "delta_w must be > 0");
  require(std::isfinite(cfg.delta_gamma) && cfg.delta_gamma >= 0.0, "delta_gamma must be >= 0");
  require(std::isfinite(cfg.tau) && cfg.tau > 0.0, "tau must be > 0");
  validate(cfg.generation);
}

}  // namespace dascore
