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


#include <gtest/gtest.h>

#include <memory>
#include <string>
#include <vector>

#include "dascore/refine/refine.hpp"
#include "test_support.hpp"

namespace dascore::refine {
namespace {

using testing::SimStack;
using testing::synthetic_decomposition;

/// Lets the first `allowed` generate calls through, then fails.
class FlakyTransport final : public backend::Transport {
 public:
  FlakyTransport(std::shared_ptr<backend::Transport> inner, int allowed) : inner_(std::move(inner)), left_(allowed) {}
  std::string id() const override { return inner_->id(); }
  Json post(std::string_view endpoint, const Json& body) override {
    if (endpoint == backend::kGenerateEndpoint && left_-- <= 0) throw TransportError("connection reset");
    return inner_->post(endpoint, body);
  }

 private:
  std::shared_ptr<backend::Transport> inner_;
  int left_;
};

/// Independent u for assertion i under a weight state, straight from the world's formula.
double expected_u(const sim::SimWorld& world, const WeightState& s, std::size_t i, double tau) {
  double x = world.base[i] + world.coeff.c_w * (s.prompt_weights[i] - 1.0) + world.coeff.c_gamma * s.attention_gains[i];
  for (std::size_t j = 0; j < world.size(); ++j) {
    if (j != i) x -= world.coeff.kappa * (s.prompt_weights[j] - 1.0);
  }
  const double e = testing::logistic_oracle(x, 0.0, 1.0);
  const double s5 = world.coeff.logit_scale;
  return testing::logistic_oracle(s5 * e, s5 * (1.0 - e), tau);
}

TEST(Refinement, TraceObeysTheLoopContract) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    SimStack stack(seed);
    const auto d = synthetic_decomposition("scene " + std::to_string(seed), 2 + seed % 4);
    stack.sim->register_decomposition(d);
    const RefinementConfig cfg;
    const auto out = run_refinement(d.prompt, d, std::nullopt, cfg, stack.services());
    const auto world = *stack.sim->world(d.prompt.text());
    ASSERT_GE(out.trace.size(), 1u);
    ASSERT_LE(out.trace.size(), 5u);
    for (std::size_t k = 0; k < out.trace.size(); ++k) {
      const auto& rec = out.trace[k];
      EXPECT_EQ(rec.k, static_cast<int>(k));
      for (std::size_t i = 0; i < d.size(); ++i) {
        EXPECT_NEAR(rec.report.scores[i].value(), expected_u(world, rec.state_before, i, cfg.tau), 1e-12);
      }
      if (k + 1 < out.trace.size()) {
        EXPECT_LT(rec.report.overall, cfg.threshold);
        const auto bumped = select_least_aligned(rec.report.scores);
        EXPECT_EQ(out.trace[k + 1].state_before, update_weights(rec.state_before, bumped, cfg));
      }
    }
    if (out.stop_reason == StopReason::kThreshold) {
      EXPECT_GE(out.trace.back().report.overall, cfg.threshold);
      EXPECT_EQ(out.best_k, out.trace.size() - 1);
    } else {
      EXPECT_EQ(out.trace.size(), 5u);
      EXPECT_EQ(out.best_k, select_best(out.trace));
    }
    EXPECT_EQ(out.best_image, out.trace[out.best_k].image);
  }
}

TEST(Refinement, PromptWeightingOnlyNeverTouchesGains) {
  SimStack stack(1);
  const auto d = synthetic_decomposition("pw only", 3);
  stack.sim->register_decomposition(d, std::vector<double>{-2, -2, -2});
  RefinementConfig cfg;
  cfg.mode = Mode::kPW;
  const auto out = run_refinement(d.prompt, d, std::nullopt, cfg, stack.services());
  EXPECT_EQ(out.stop_reason, StopReason::kBudgetExhausted);
  for (const auto& rec : out.trace) {
    for (double g : rec.state_before.attention_gains) EXPECT_EQ(g, 0.0);
  }
}

TEST(Refinement, BudgetOfOneRunsOnce) {
  SimStack stack(2);
  const auto d = synthetic_decomposition("once", 2);
  stack.sim->register_decomposition(d, std::vector<double>{-2, -2});
  RefinementConfig cfg;
  cfg.max_iterations = 1;
  const auto out = run_refinement(d.prompt, d, std::nullopt, cfg, stack.services());
  ASSERT_EQ(out.trace.size(), 1u);
  EXPECT_EQ(out.best_k, 0u);
  EXPECT_EQ(out.stop_reason, StopReason::kBudgetExhausted);
  EXPECT_EQ(stack.transport->calls(), 1u + d.size());
}

TEST(Refinement, TinyThresholdStopsImmediately) {
  SimStack stack(3);
  const auto d = synthetic_decomposition("easy", 2);
  stack.sim->register_decomposition(d);
  RefinementConfig cfg;
  cfg.threshold = 1e-9;
  const auto out = run_refinement(d.prompt, d, std::nullopt, cfg, stack.services());
  EXPECT_EQ(out.trace.size(), 1u);
  EXPECT_EQ(out.stop_reason, StopReason::kThreshold);
}

TEST(Refinement, LambdasSteerTheOverallScore) {
  SimStack stack(4);
  const auto d = synthetic_decomposition("weighted", 2);
  stack.sim->register_decomposition(d, std::vector<double>{2, -2});
  RefinementConfig cfg;
  cfg.max_iterations = 1;
  const auto out = run_refinement(d.prompt, d, std::vector<double>{0, 1}, cfg, stack.services());
  EXPECT_EQ(out.trace[0].report.overall, out.trace[0].report.scores[1].value());
  EXPECT_THROW(run_refinement(d.prompt, d, std::vector<double>{1}, cfg, stack.services()), InvalidArgument);
}

TEST(Refinement, ForeignDecompositionIsRejected) {
  SimStack stack;
  const auto d = synthetic_decomposition("one prompt", 2);
  EXPECT_THROW(run_refinement(Prompt("another prompt"), d, std::nullopt, RefinementConfig{}, stack.services()),
               InvalidArgument);
}

TEST(Refinement, FailureCarriesThePartialTrace) {
  auto sim = std::make_shared<sim::SimBackend>(5);
  const auto d = synthetic_decomposition("flaky", 2);
  sim->register_decomposition(d, std::vector<double>{-2, -2});
  auto transport = std::make_shared<FlakyTransport>(std::make_shared<sim::SimTransport>(sim), 2);
  auto client = std::make_shared<backend::Client>(transport);
  auto images = std::make_shared<backend::ImageStore>();
  generate::Generator generator(client, images);
  vqa::Scorer scorer(client, images, 1);
  try {
    run_refinement(d.prompt, d, std::nullopt, RefinementConfig{}, Services{generator, scorer, nullptr});
    FAIL();
  } catch (const RefinementError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTransport);
    ASSERT_EQ(e.trace().size(), 2u);
    EXPECT_EQ(e.trace()[1].k, 1);
  }
}

TEST(Refinement, LedgerReplayReproducesTheOutcome) {
  auto ledger = std::make_shared<store::MemoryLedger>();
  SimStack stack(6, {}, nullptr, ledger);
  const auto d = synthetic_decomposition("replayed", 3);
  stack.sim->register_decomposition(d);
  const auto out = run_refinement(d.prompt, d, std::nullopt, RefinementConfig{}, stack.services(), "sess");
  EXPECT_EQ(replay_from_ledger(*ledger, "sess"), out);
  EXPECT_THROW(replay_from_ledger(*ledger, "missing"), InvalidArgument);

  // A ledger whose reports disagree with the outcome is caught.
  store::MemoryLedger tampered;
  for (auto e : ledger->scan()) {
    if (e.kind == store::EntryKind::kReport && e.payload.at("k") == 0) e.payload["report"]["overall"] = 0.123;
    tampered.append(e);
  }
  EXPECT_THROW(replay_from_ledger(tampered, "sess"), IntegrityError);
}

TEST(Refinement, OutcomeJsonRoundTrips) {
  SimStack stack(7);
  const auto d = synthetic_decomposition("json", 2);
  stack.sim->register_decomposition(d);
  const auto out = run_refinement(d.prompt, d, std::nullopt, RefinementConfig{}, stack.services());
  EXPECT_EQ(outcome_from_json(parse_json(canonical(to_json(out)))), out);
}

TEST(Refinement, WarmCacheMakesNoBackendCalls) {
  auto cache = std::make_shared<store::MemoryCache>();
  const auto d = synthetic_decomposition("cached", 3);
  RefinementOutcome cold;
  {
    SimStack stack(8, {}, cache);
    stack.sim->register_decomposition(d);
    cold = run_refinement(d.prompt, d, std::nullopt, RefinementConfig{}, stack.services());
    EXPECT_GT(stack.transport->calls(), 0u);
  }
  SimStack warm(8, {}, cache);  // no world registered: any real call would fail
  const auto again = run_refinement(d.prompt, d, std::nullopt, RefinementConfig{}, warm.services());
  EXPECT_EQ(warm.transport->calls(), 0u);
  EXPECT_EQ(canonical(to_json(again)), canonical(to_json(cold)));
}

TEST(Refinement, ConcurrentScoringMatchesSerial) {
  const auto d = synthetic_decomposition("parallel", 5);
  SimStack serial(9, {}, nullptr, nullptr, 1);
  SimStack parallel(9, {}, nullptr, nullptr, 4);
  serial.sim->register_decomposition(d);
  parallel.sim->register_decomposition(d);
  const auto a = run_refinement(d.prompt, d, std::nullopt, RefinementConfig{}, serial.services());
  const auto b = run_refinement(d.prompt, d, std::nullopt, RefinementConfig{}, parallel.services());
  EXPECT_EQ(canonical(to_json(a)), canonical(to_json(b)));
}

}  // namespace
}  // namespace dascore::refine
