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

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dascore/core/error.hpp"
#include "dascore/core/json.hpp"
#include "dascore/core/score.hpp"
#include "dascore/core/types.hpp"
#include "dascore/generate/generate.hpp"
#include "dascore/store/ledger.hpp"
#include "dascore/vqa/vqa.hpp"

namespace dascore::refine {

struct IterationRecord {
  int k = 0;
  WeightState state_before;
  ImageRef image;
  AlignmentReport report;

  friend bool operator==(const IterationRecord&, const IterationRecord&) = default;
};

enum class StopReason { kThreshold, kBudgetExhausted };

inline std::string_view to_string(StopReason reason) {
  return reason == StopReason::kThreshold ? "threshold" : "budget_exhausted";
}

inline StopReason parse_stop_reason(std::string_view text) {
  if (text == "threshold") return StopReason::kThreshold;
  if (text == "budget_exhausted") return StopReason::kBudgetExhausted;
  throw ParseError("unknown stop reason", std::string(text));
}

struct RefinementOutcome {
  ImageRef best_image;
  std::size_t best_k = 0;
  std::vector<IterationRecord> trace;
  StopReason stop_reason = StopReason::kBudgetExhausted;

  friend bool operator==(const RefinementOutcome&, const RefinementOutcome&) = default;
};

/// A session failed part-way. `trace()` holds every iteration that completed.
class RefinementError : public Error {
 public:
  RefinementError(const Error& cause, std::vector<IterationRecord> partial)
      : Error(cause.code(), std::string("refinement aborted after ") + std::to_string(partial.size()) +
                                " iteration(s): " + cause.what()),
        trace_(std::move(partial)) {}

  const std::vector<IterationRecord>& trace() const noexcept { return trace_; }

 private:
  std::vector<IterationRecord> trace_;
};

inline std::size_t select_best(std::span<const IterationRecord> trace) {
  std::vector<double> overall;
  overall.reserve(trace.size());
  for (const auto& r : trace) overall.push_back(r.report.overall);
  return dascore::select_best(overall);
}

inline Json to_json(const IterationRecord& r) {
  return Json{{"k", r.k},
              {"state_before", dascore::to_json(r.state_before)},
              {"image", dascore::to_json(r.image)},
              {"report", dascore::to_json(r.report)}};
}

inline IterationRecord iteration_from_json(const Json& j, std::string_view path = "") {
  using namespace json_detail;
  IterationRecord r;
  const Json& k = member(j, "k", path);
  if (!k.is_number_integer()) throw ParseError("expected an integer", child(path, "k"));
  r.k = k.get<int>();
  r.state_before = weight_state_from_json(member(j, "state_before", path), child(path, "state_before"));
  r.image = image_ref_from_json(member(j, "image", path), child(path, "image"));
  r.report = report_from_json(member(j, "report", path), child(path, "report"));
  return r;
}

inline Json to_json(const RefinementOutcome& o) {
  Json trace = Json::array();
  for (const auto& r : o.trace) trace.push_back(to_json(r));
  return Json{{"best_image", dascore::to_json(o.best_image)},
              {"best_k", o.best_k},
              {"stop_reason", std::string(to_string(o.stop_reason))},
              {"trace", std::move(trace)}};
}

inline RefinementOutcome outcome_from_json(const Json& j) {
  using namespace json_detail;
  RefinementOutcome o;
  o.best_image = image_ref_from_json(member(j, "best_image", ""), "/best_image");
  o.best_k = member(j, "best_k", "").get<std::size_t>();
  o.stop_reason = parse_stop_reason(string_at(j, "stop_reason", ""));
  const Json& trace = member(j, "trace", "");
  for (std::size_t i = 0; i < trace.size(); ++i) {
    o.trace.push_back(iteration_from_json(trace[i], "/trace/" + std::to_string(i)));
  }
  return o;
}

/// The generation and scoring services a session talks to.
struct Services {
  const generate::Generator& generator;
  const vqa::Scorer& scorer;
  store::Ledger* ledger = nullptr;
};

namespace detail {

inline void record(store::Ledger* ledger, std::string_view session_id, store::EntryKind kind, const Json& payload) {
  if (!ledger) return;
  store::LedgerEntry entry;
  entry.timestamp = store::utc_timestamp();
  entry.session_id = std::string(session_id);
  entry.kind = kind;
  entry.response_hash = canonical_hash(payload);
  entry.payload = payload;
  ledger->append(entry);
}

}  // namespace detail

/// Generate, score, and either stop or bump the least aligned assertion,
/// for at most `cfg.max_iterations` rounds.
///
/// Weights start at w = 1, gamma = 0. Round k generates with the current
/// weights and scores the image. If the overall score reaches the threshold
/// the current image is returned at once (stop_reason = threshold).
/// Otherwise the argmin assertion gets +delta_w (and +delta_gamma in PW_CA).
/// When the budget runs out, the round with the highest overall score wins
/// (earliest on ties). The decomposition is fixed for the whole session.
inline RefinementOutcome run_refinement(const Prompt& prompt, const Decomposition& decomposition,
                                        const std::optional<std::vector<double>>& lambdas,
                                        const RefinementConfig& cfg, const Services& services,
                                        std::string_view session_id = {}) {
  validate(cfg);
  validate(decomposition);
  require(decomposition.prompt == prompt, "decomposition belongs to a different prompt");
  if (lambdas) require(lambdas->size() == decomposition.size(), "lambdas must have one entry per assertion");

  RefinementOutcome outcome;
  WeightState state = WeightState::initial(decomposition.size());
  for (int k = 0; k < cfg.max_iterations; ++k) {
    IterationRecord record;
    record.k = k;
    record.state_before = state;
    try {
      const auto request = generate::build_request(prompt, decomposition, state, cfg.generation, cfg.mode);
      record.image = services.generator.generate(request, session_id).image;
      record.report = services.scorer.evaluate(record.image, decomposition, lambdas, cfg.tau, session_id);
    } catch (const Error& e) {
      throw RefinementError(e, outcome.trace);
    }
    detail::record(services.ledger, session_id, store::EntryKind::kReport, to_json(record));
    outcome.trace.push_back(record);

    if (record.report.overall >= cfg.threshold) {
      outcome.stop_reason = StopReason::kThreshold;
      outcome.best_k = outcome.trace.size() - 1;
      outcome.best_image = record.image;
      detail::record(services.ledger, session_id, store::EntryKind::kOutcome, to_json(outcome));
      return outcome;
    }
    if (k + 1 < cfg.max_iterations) {
      state = update_weights(state, select_least_aligned(record.report.scores), cfg);
    }
  }
  outcome.stop_reason = StopReason::kBudgetExhausted;
  outcome.best_k = select_best(outcome.trace);
  outcome.best_image = outcome.trace[outcome.best_k].image;
  detail::record(services.ledger, session_id, store::EntryKind::kOutcome, to_json(outcome));
  return outcome;
}

/// A single scoring pass with no generation.
inline AlignmentReport evaluate_only(const Prompt& prompt, const ImageRef& image, const Decomposition& decomposition,
                                     const std::optional<std::vector<double>>& lambdas, const RefinementConfig& cfg,
                                     const vqa::Scorer& scorer, std::string_view session_id = {}) {
  require(decomposition.prompt == prompt, "decomposition belongs to a different prompt");
  validate(cfg);
  return scorer.evaluate(image, decomposition, lambdas, cfg.tau, session_id);
}

/// Rebuilds a session's trace and outcome from its ledger entries. Throws
/// when the session has no recorded outcome or the recorded outcome
/// disagrees with the per-iteration reports.
inline RefinementOutcome replay_from_ledger(const store::Ledger& ledger, std::string_view session_id) {
  std::vector<IterationRecord> trace;
  std::optional<RefinementOutcome> recorded;
  for (const auto& e : ledger.session(session_id)) {
    if (e.kind == store::EntryKind::kReport) trace.push_back(iteration_from_json(e.payload));
    if (e.kind == store::EntryKind::kOutcome) recorded = outcome_from_json(e.payload);
  }
  if (!recorded) throw InvalidArgument("session '" + std::string(session_id) + "' has no recorded outcome");
  if (recorded->trace != trace) {
    throw IntegrityError("ledger iterations for session '" + std::string(session_id) +
                         "' disagree with its recorded outcome");
  }
  return *recorded;
}

}  // namespace dascore::refine
