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

#include <random>
#include <string>

#include "dascore/core/image.hpp"
#include "dascore/core/json.hpp"
#include "dascore/core/types.hpp"
#include "dascore/util/digest.hpp"
#include "test_support.hpp"

namespace dascore {
namespace {

TEST(Prompt, TrimsAndRejectsBlank) {
  EXPECT_EQ(Prompt("  a cat \n").text(), "a cat");
  EXPECT_THROW(Prompt(""), InvalidArgument);
  EXPECT_THROW(Prompt(" \t "), InvalidArgument);
}

TEST(Decomposition, ValidationCatchesBrokenInvariants) {
  auto d = testing::synthetic_decomposition("p", 2);
  EXPECT_NO_THROW(validate(d));
  d.assertions[1].index = 5;
  EXPECT_THROW(validate(d), InvalidArgument);
  d.assertions[1].index = 1;
  d.assertions[1].question = "is there a thing";
  EXPECT_THROW(validate(d), InvalidArgument);
  d.assertions.clear();
  EXPECT_THROW(validate(d), InvalidArgument);
}

TEST(WeightState, InitialStateAndBounds) {
  const auto s = WeightState::initial(3);
  EXPECT_EQ(s.prompt_weights, (std::vector<double>{1, 1, 1}));
  EXPECT_EQ(s.attention_gains, (std::vector<double>{0, 0, 0}));
  EXPECT_THROW(validate(WeightState{{0.9}, {0.0}}), InvalidArgument);
  EXPECT_THROW(validate(WeightState{{1.0}, {-0.1}}), InvalidArgument);
  EXPECT_THROW(validate(WeightState{{1.0, 1.0}, {0.0}}), InvalidArgument);
}

TEST(Mode, ParsesBothSpellings) {
  EXPECT_EQ(parse_mode("pw"), Mode::kPW);
  EXPECT_EQ(parse_mode("PW_CA"), Mode::kPWCA);
  EXPECT_EQ(parse_mode("pw-ca"), Mode::kPWCA);
  EXPECT_THROW(parse_mode("ca"), InvalidArgument);
}

TEST(Canonical, SortsKeysWithoutWhitespace) {
  const Json j = parse_json(R"({"b": 1, "a": [1.5, "x"], "c": {"z": null, "y": true}})");
  EXPECT_EQ(canonical(j), R"({"a":[1.5,"x"],"b":1,"c":{"y":true,"z":null}})");
}

TEST(Canonical, DoublesRoundTripExactly) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> dist(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double x = dist(rng) / 3.0;
    EXPECT_EQ(parse_json(canonical(Json(x))).get<double>(), x);
  }
  EXPECT_EQ(canonical(Json(0.1)), "0.1");
}

TEST(ParseJson, ErrorsCarryAnOffset) {
  try {
    parse_json("{\"a\": }");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_FALSE(e.span().empty());
  }
}

TEST(DecompositionJson, RoundTrips) {
  const auto d = testing::synthetic_decomposition("three things", 3);
  EXPECT_EQ(decomposition_from_json(parse_json(canonical(to_json(d)))), d);
}

TEST(DecompositionJson, MissingFieldNamesItsPointer) {
  Json j = to_json(testing::synthetic_decomposition("p", 2));
  j["assertions"][1].erase("question");
  try {
    decomposition_from_json(j);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.span(), "/assertions/1/question");
  }
}

TEST(ReportJson, RoundTrips) {
  AlignmentReport r;
  r.logits = {{2.5, 1.0}, {0.0, 3.25}};
  r.scores = {AssertionScore(0.84), AssertionScore(0.03)};
  r.lambdas = {1.0, 0.5};
  r.overall = 0.57;
  EXPECT_EQ(report_from_json(parse_json(canonical(to_json(r)))), r);
}

TEST(Overrides, AppliesKnownKeysAndRejectsOthers) {
  const auto cfg = apply_overrides(RefinementConfig{}, parse_json(R"({"k": 3, "mode": "pw", "tau": 1.5, "seed": 9})"));
  EXPECT_EQ(cfg.max_iterations, 3);
  EXPECT_EQ(cfg.mode, Mode::kPW);
  EXPECT_EQ(cfg.tau, 1.5);
  EXPECT_EQ(cfg.generation.seed, 9u);
  try {
    apply_overrides(RefinementConfig{}, parse_json(R"({"tua": 1})"), "/overrides");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.span(), "/overrides/tua");
  }
  EXPECT_THROW(apply_overrides(RefinementConfig{}, parse_json(R"({"k": 0})")), ParseError);
  EXPECT_THROW(apply_overrides(RefinementConfig{}, parse_json(R"({"k": 2.5})")), ParseError);
}

TEST(Digest, KnownSha256) {
  EXPECT_EQ(util::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_TRUE(util::is_sha256_hex(util::sha256_hex("")));
  EXPECT_FALSE(util::is_sha256_hex("ABC"));
}

TEST(Digest, Base64RoundTripsArbitraryBytes) {
  std::mt19937_64 rng(2);
  for (std::size_t len = 0; len < 64; ++len) {
    std::string bytes(len, '\0');
    for (auto& c : bytes) c = static_cast<char>(rng() & 0xff);
    EXPECT_EQ(util::base64_decode(util::base64_encode(bytes)), bytes);
  }
  EXPECT_EQ(util::base64_encode("hi"), "aGk=");
  EXPECT_THROW(util::base64_decode("abc"), InvalidArgument);
  EXPECT_THROW(util::base64_decode("ab$="), InvalidArgument);
}

TEST(ImageRef, HashesBytesAndComparesByIdentity) {
  const auto a = ImageRef::from_bytes("pixels", "image/png");
  EXPECT_EQ(a.sha256(), util::sha256_hex("pixels"));
  EXPECT_TRUE(a.has_bytes());
  const auto b = ImageRef::from_hash(a.sha256(), "image/png");
  EXPECT_FALSE(b.has_bytes());
  EXPECT_EQ(a, b);
  EXPECT_THROW(ImageRef::from_bytes("", "image/png"), InvalidArgument);
  EXPECT_THROW(ImageRef::from_hash("nothex"), InvalidArgument);
  EXPECT_EQ(guess_media_type("x.jpeg"), "image/jpeg");
}

}  // namespace
}  // namespace dascore
