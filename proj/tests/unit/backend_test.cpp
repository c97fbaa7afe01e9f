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

#include <cmath>
#include <functional>
#include <memory>
#include <string>

#include "dascore/backend/client.hpp"
#include "dascore/backend/protocol.hpp"
#include "dascore/backend/transport.hpp"
#include "dascore/generate/generate.hpp"
#include "dascore/sim/server.hpp"
#include "test_support.hpp"

namespace dascore::backend {
namespace {

/// Transport answering from a callback; counts calls.
class FakeTransport final : public Transport {
 public:
  explicit FakeTransport(std::function<Json(std::string_view, const Json&)> reply) : reply_(std::move(reply)) {}
  std::string id() const override { return "fake"; }
  Json post(std::string_view endpoint, const Json& body) override {
    ++calls;
    return reply_(endpoint, body);
  }
  int calls = 0;

 private:
  std::function<Json(std::string_view, const Json&)> reply_;
};

GenerationRequest sample_request() {
  GenerationRequest r;
  r.prompt = "a cat with a ball";
  r.sub_prompts = {{"a cat", 1.1}, {"a ball", 1.0}};
  r.attention_targets = {{"cat", 1.0}, {"ball", 0.0}};
  r.mode = Mode::kPWCA;
  return r;
}

TEST(GenerateWire, GoldenRequestBytes) {
  EXPECT_EQ(canonical(to_json(sample_request())),
            R"({"attention_targets":[{"gain":1.0,"token":"cat"},{"gain":0.0,"token":"ball"}],)"
            R"("attn_step_size":10.0,"attn_update_steps":20,"guidance_scale":7.5,"height":512,"mode":"PW_CA",)"
            R"("num_steps":50,"prompt":"a cat with a ball","seed":0,)"
            R"("sub_prompts":[{"text":"a cat","weight":1.1},{"text":"a ball","weight":1.0}],"width":512})");
}

TEST(GenerateWire, RequestRoundTrips) {
  const auto r = sample_request();
  EXPECT_EQ(generate_request_from_json(parse_json(canonical(to_json(r)))), r);
}

TEST(GenerateWire, SchemaViolationsNameTheField) {
  Json j = to_json(sample_request());
  j["sub_prompts"][1].erase("weight");
  try {
    generate_request_from_json(j);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.span(), "/sub_prompts/1/weight");
  }
  Json pw = to_json(sample_request());
  pw["mode"] = "PW";
  EXPECT_THROW(generate_request_from_json(pw), ParseError);
  Json low = to_json(sample_request());
  low["sub_prompts"][0]["weight"] = 0.5;
  EXPECT_THROW(generate_request_from_json(low), ParseError);
  Json steps = to_json(sample_request());
  steps["num_steps"] = 10;
  EXPECT_THROW(generate_request_from_json(steps), ParseError);  // attn_update_steps > num_steps
}

TEST(GenerateWire, ResponseNeedsAnImage) {
  EXPECT_THROW(generate_response_from_json(Json{{"metadata", Json::object()}}), ProtocolError);
  const auto r = generate_response_from_json(Json{{"image_ref", std::string(64, 'a')}, {"metadata", {{"n", 3}}}});
  EXPECT_EQ(r.metadata.at("n"), "3");
}

TEST(VqaWire, LogitsPassThrough) {
  const auto l = vqa_logits_from_response(Json{{"yes_logit", 2.0}, {"no_logit", -1.0}});
  EXPECT_EQ(l.yes_logit, 2.0);
  EXPECT_EQ(l.no_logit, -1.0);
}

TEST(VqaWire, ProbabilityBecomesLogOdds) {
  const auto l = vqa_logits_from_response(Json{{"yes_prob", 0.75}});
  EXPECT_NEAR(l.yes_logit, std::log(0.75), 1e-15);
  EXPECT_NEAR(l.no_logit, std::log(0.25), 1e-15);
  // With tau = 1 the score is p itself.
  EXPECT_NEAR(assertion_alignment(l, 1.0).value(), 0.75, 1e-12);
  const auto one = vqa_logits_from_response(Json{{"yes_prob", 1.0}});
  EXPECT_TRUE(std::isfinite(one.no_logit));
  EXPECT_THROW(vqa_logits_from_response(Json{{"yes_prob", 1.5}}), ProtocolError);
  EXPECT_THROW(vqa_logits_from_response(Json{{"answer", "yes"}}), ProtocolError);
  EXPECT_THROW(vqa_logits_from_response(Json{{"yes_logit", "high"}, {"no_logit", 0}}), ProtocolError);
}

TEST(VqaWire, RequestNeedsExactlyOneImageForm) {
  EXPECT_THROW(vqa_request_from_json(Json{{"question", "q?"}}), ParseError);
  EXPECT_THROW(vqa_request_from_json(Json{{"question", "q?"}, {"image_b64", "aGk="}, {"image_ref", "x"}}),
               ParseError);
  EXPECT_THROW(vqa_request_from_json(Json{{"question", "q?"}, {"image_ref", "nothex"}}), ParseError);
  const auto r = vqa_request_from_json(Json{{"question", "q?"}, {"image_b64", "aGk="}});
  EXPECT_EQ(*r.image_b64, "aGk=");
}

TEST(Client, CachesResponsesAndLedgersEveryCall) {
  auto transport = std::make_shared<FakeTransport>([](std::string_view, const Json& body) {
    return Json{{"echo", body.at("x")}};
  });
  auto cache = std::make_shared<store::MemoryCache>();
  auto ledger = std::make_shared<store::MemoryLedger>();
  Client client(transport, cache, ledger);
  const Json body{{"x", 1}};
  const Json first = client.call(store::EntryKind::kVqa, kVqaEndpoint, body, body, "s1");
  const Json second = client.call(store::EntryKind::kVqa, kVqaEndpoint, body, body, "s1");
  EXPECT_EQ(first, second);
  EXPECT_EQ(transport->calls, 1);
  EXPECT_EQ(client.backend_calls(), 1u);
  EXPECT_EQ(client.cache_hits(), 1u);
  const auto entries = ledger->session("s1");
  ASSERT_EQ(entries.size(), 2u);
  EXPECT_FALSE(entries[0].payload.at("cached").get<bool>());
  EXPECT_TRUE(entries[1].payload.at("cached").get<bool>());
  EXPECT_EQ(entries[0].request_hash, store::cache_key("fake", kVqaEndpoint, body));
  EXPECT_EQ(entries[0].response_hash, canonical_hash(first));
}

TEST(Client, FailedCallsAreLedgeredAndRethrown) {
  auto transport = std::make_shared<FakeTransport>([](std::string_view, const Json&) -> Json {
    throw ProtocolError("backend said no", 503);
  });
  auto ledger = std::make_shared<store::MemoryLedger>();
  auto cache = std::make_shared<store::MemoryCache>();
  Client client(transport, cache, ledger);
  EXPECT_THROW(client.call(store::EntryKind::kGenerate, kGenerateEndpoint, Json::object(), Json::object(), "s"),
               ProtocolError);
  EXPECT_EQ(cache->size(), 0u);
  const auto entries = ledger->session("s");
  ASSERT_EQ(entries.size(), 1u);
  EXPECT_EQ(entries[0].payload.at("error").at("code"), "protocol_error");
}

TEST(Client, LedgerDropsInlineImageBytes) {
  const Json stripped = strip_inline_images(Json{{"image_b64", util::base64_encode("pixels")}, {"q", "x"}});
  EXPECT_FALSE(stripped.contains("image_b64"));
  EXPECT_EQ(stripped.at("image_b64_sha256"), util::sha256_hex("pixels"));
}

TEST(HttpTransport, UnreachableBackendIsATransportError) {
  HttpOptions options;
  options.connect_timeout = std::chrono::milliseconds(500);
  HttpTransport transport("http://127.0.0.1:1", options);
  EXPECT_THROW(transport.post(kVqaEndpoint, Json::object()), TransportError);
  EXPECT_THROW(HttpTransport("ftp://x"), InvalidArgument);
  EXPECT_EQ(split_base_url("http://h:9/api/").second, "/api");
}

TEST(HttpTransport, ErrorStatusesBecomeProtocolErrors) {
  sim::SimServer server(std::make_shared<sim::SimBackend>());
  server.start();
  HttpTransport transport(server.base_url());
  try {
    transport.post(kVqaEndpoint, Json{{"question", "q?"}});
    FAIL();
  } catch (const ProtocolError& e) {
    EXPECT_EQ(e.status(), 400);
  }
  try {
    transport.post("/v1/unknown", Json::object());
    FAIL();
  } catch (const ProtocolError& e) {
    EXPECT_EQ(e.status(), 404);
  }
}

TEST(Generator, InvalidParametersNeverReachTheBackend) {
  auto transport = std::make_shared<FakeTransport>([](std::string_view, const Json&) { return Json::object(); });
  generate::Generator generator(std::make_shared<Client>(transport), nullptr);
  auto bad = sample_request();
  bad.mode = Mode::kPW;  // gain 1.0 on "cat" is illegal in PW
  EXPECT_THROW(generator.generate(bad), InvalidArgument);
  EXPECT_EQ(transport->calls, 0);
}

TEST(Generator, BuildRequestPairsWeightsWithAssertions) {
  const auto d = testing::synthetic_decomposition("p", 2);
  WeightState state{{1.0, 1.3}, {0.0, 3.0}};
  const auto r = generate::build_request(d.prompt, d, state, GenerationDefaults{}, Mode::kPWCA);
  EXPECT_EQ(r.sub_prompts[1], (WeightedSubPrompt{"a thing1", 1.3}));
  EXPECT_EQ(r.attention_targets[1], (AttentionTarget{"thing1", 3.0}));
  EXPECT_THROW(generate::build_request(d.prompt, d, state, GenerationDefaults{}, Mode::kPW), InvalidArgument);
  EXPECT_THROW(generate::build_request(d.prompt, d, WeightState::initial(3), GenerationDefaults{}, Mode::kPW),
               InvalidArgument);
}

}  // namespace
}  // namespace dascore::backend
