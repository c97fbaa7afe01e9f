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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "dascore/core/error.hpp"
#include "dascore/core/types.hpp"

namespace dascore {

/// Logistic function evaluated without overflow for any finite argument.
inline double logistic(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Temperature softmax over the yes/no logits of one VQA answer:
///   u = exp(yes/tau) / (exp(yes/tau) + exp(no/tau))
/// Evaluated as logistic((yes - no) / tau), which is the same quantity and
/// cannot overflow.
/// Both branches share one exponential, so u(a, b) + u(b, a) == 1 to rounding.
inline AssertionScore assertion_alignment(const VqaLogits& logits, double tau) {
  require(std::isfinite(tau) && tau > 0.0, "tau must be finite and > 0");
  require(std::isfinite(logits.yes_logit) && std::isfinite(logits.no_logit),
          "VQA logits must be finite");
  const double x = (logits.yes_logit - logits.no_logit) / tau;
  if (x == 0.0) return AssertionScore(0.5);
  if (x > 0.0) {
    const double e = std::exp(-x);
    return AssertionScore(1.0 / (1.0 + e));
  }
  const double e = std::exp(x);
  return AssertionScore(e / (1.0 + e));
}

/// Weighted mean sum(lambda_i * u_i) / sum(lambda_i). A zero lambda excludes
/// an assertion from the total.
inline double combine(std::span<const AssertionScore> scores, std::span<const double> lambdas) {
  require(!scores.empty(), "cannot combine an empty score list");
  require(scores.size() == lambdas.size(), "scores and lambdas must have equal length");
  double weighted = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    require(std::isfinite(lambdas[i]) && lambdas[i] >= 0.0, "lambdas must be finite and >= 0");
    weighted += lambdas[i] * scores[i].value();
    total += lambdas[i];
  }
  require(total > 0.0, "sum of lambdas must be > 0");
  double overall = weighted / total;
  // Rounding may push the quotient a hair outside the hull of the scores.
  double lo = 1.0;
  double hi = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (lambdas[i] > 0.0) {
      lo = std::min(lo, scores[i].value());
      hi = std::max(hi, scores[i].value());
    }
  }
  return std::clamp(overall, lo, hi);
}

/// Index of the lowest score; ties go to the lowest index.
inline std::size_t select_least_aligned(std::span<const AssertionScore> scores) {
  require(!scores.empty(), "cannot select from an empty score list");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i].value() < scores[best].value()) best = i;
  }
  return best;
}

/// Returns a new state with the target coordinate incremented: w by delta_w,
/// and in PW_CA mode gamma by delta_gamma.
inline WeightState update_weights(const WeightState& state, std::size_t target,
                                  const RefinementConfig& cfg) {
  require(target < state.size(), "update target index out of range");
  require(state.attention_gains.size() == state.size(), "malformed weight state");
  WeightState next = state;
  next.prompt_weights[target] += cfg.delta_w;
  if (cfg.mode == Mode::kPWCA) next.attention_gains[target] += cfg.delta_gamma;
  return next;
}

/// Index of the highest overall score; ties go to the earliest entry.
inline std::size_t select_best(std::span<const double> overall_scores) {
  require(!overall_scores.empty(), "cannot select from an empty trace");
  std::size_t best = 0;
  for (std::size_t i = 1; i < overall_scores.size(); ++i) {
    if (overall_scores[i] > overall_scores[best]) best = i;
  }
  return best;
}

inline std::vector<double> unit_lambdas(std::size_t n) { return std::vector<double>(n, 1.0); }

}  // namespace dascore
