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

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dascore/benchmark/metrics.hpp"
#include "dascore/core/error.hpp"
#include "dascore/core/json.hpp"
#include "dascore/decompose/decompose.hpp"

namespace dascore::benchmark {

struct PromptPoolRequest {
  int subjects_count = 2;
  Realism realism = Realism::kEasy;
  int batch_size = 1;
  std::vector<decompose::ChatMessage> messages;

  std::string text() const {
    std::string out;
    for (const auto& m : messages) out += m.role + ": " + m.content + "\n\n";
    return out;
  }
};

namespace detail {

inline std::string_view realism_guidance(Realism r) {
  switch (r) {
    case Realism::kEasy:
      return "each new subject must be one that commonly appears together with the previous ones in ordinary "
             "photo captions";
    case Realism::kMedium:
      return "each new subject should plausibly but less commonly appear together with the previous ones";
    case Realism::kHard:
      return "each new subject should rarely appear together with the previous ones";
    case Realism::kVeryHard:
      return "each new subject should almost never appear together with the previous ones, giving an "
             "imaginative, unrealistic scene";
  }
  return "";
}

}  // namespace detail

/// Instruction for an LLM to grow captions one subject at a time up to
/// `subjects_count` subjects, at the requested realism difficulty. Each batch
/// walks the four difficulty levels in increasing order; the reply is a JSON
/// array of {prompt, subjects_count, realism}.
inline PromptPoolRequest build_promptpool_request(int subjects_count, Realism realism, int batch_size) {
  require(subjects_count >= 2 && subjects_count <= 5, "subjects_count must lie in 2..5");
  require(batch_size >= 1, "batch_size must be >= 1");
  PromptPoolRequest request{subjects_count, realism, batch_size, {}};
  request.messages.push_back(
      {"system",
       "You write short image captions for testing text-to-image models. Build each caption step by step: "
       "start from one random subject (for example \"a dog\"), then add one more subject at a time and rewrite "
       "the caption so it combines all subjects in one grammatical sentence (for example \"a dog wearing "
       "sunglasses\", then \"a dog wearing sunglasses on a skateboard\"). Stop when the caption has the target "
       "number of subjects. Discard captions that are not grammatical."});
  std::string user = "Target number of subjects: " + std::to_string(subjects_count) + ".\n";
  user += "Target realism difficulty: \"" + std::string(to_string(realism)) + "\" (" +
          std::string(detail::realism_guidance(realism)) + ").\n";
  user += "Produce " + std::to_string(batch_size) +
          " batch(es). Each batch contains 4 captions grown from the same first subject, one per realism level "
          "in the order easy, medium, hard, very_hard; report the \"" +
          std::string(to_string(realism)) + "\" caption of every batch.\n";
  user += "Answer with only a JSON array of objects with fields \"prompt\" (string), \"subjects_count\" "
          "(integer) and \"realism\" (one of easy, medium, hard, very_hard).";
  request.messages.push_back({"user", std::move(user)});
  return request;
}

struct PoolPrompt {
  std::string prompt;
  int subjects_count = 2;
  Realism realism = Realism::kEasy;
};

inline std::vector<PoolPrompt> parse_promptpool_response(std::string_view raw) {
  const auto open = raw.find('[');
  const auto end = open == std::string_view::npos ? open : decompose::detail::match_bracket(raw, open);
  if (end == std::string_view::npos) throw ParseError("no JSON array found in prompt-pool response", std::string(raw.substr(0, 80)));
  const Json list = parse_json(raw.substr(open, end - open));
  std::vector<PoolPrompt> out;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string at = "/" + std::to_string(i);
    PoolPrompt p;
    p.prompt = json_detail::string_at(list[i], "prompt", at);
    const Json& count = json_detail::member(list[i], "subjects_count", at);
    if (!count.is_number_integer() || count.get<int>() < 2 || count.get<int>() > 5) {
      throw ParseError("subjects_count must be an integer in 2..5", at + "/subjects_count");
    }
    p.subjects_count = count.get<int>();
    auto realism = parse_realism(json_detail::string_at(list[i], "realism", at));
    if (!realism) throw ParseError("unknown realism level", at + "/realism");
    p.realism = *realism;
    out.push_back(std::move(p));
  }
  return out;
}

// --- offline combinatorial pool ---------------------------------------------------

namespace detail {

// Entries contain no commas and none of the fallback splitter's connective
// words, so every generated caption splits into exactly one fragment per slot.
inline constexpr std::array<std::string_view, 12> kCreatures = {
    "a dog",  "a cat",     "a lion",   "a penguin", "a horse", "an elephant",
    "a fox",  "a giraffe", "a rabbit", "an owl",    "a robot", "a young girl"};
inline constexpr std::array<std::string_view, 10> kCompanions = {
    "a parrot", "a turtle", "a boy",    "a squirrel", "a panda",
    "a duck",   "a goat",   "a monkey", "a chef",     "a knight"};
inline constexpr std::array<std::string_view, 12> kObjects = {
    "a red ball",  "a guitar",   "a blue umbrella", "sunglasses", "a skateboard", "a teapot",
    "a wooden chair", "a kite",  "a backpack",      "a bicycle",  "a lantern",    "a yellow hat"};
inline constexpr std::array<std::string_view, 10> kPlaces = {
    "a park",     "a kitchen", "the desert",  "a library", "a snowy forest",
    "the beach",  "a museum",  "a rooftop",   "a garden",  "a train station"};
inline constexpr std::array<std::string_view, 8> kTimes = {
    "sunset", "a thunderstorm", "winter", "the night", "a festival", "sunrise", "the rain", "autumn"};

struct Slot {
  std::span<const std::string_view> words;
  std::string_view connector;  // text placed before this slot
};

inline std::vector<Slot> slots_for(int subjects_count) {
  std::vector<Slot> slots{{kCreatures, ""}};
  if (subjects_count == 5) slots.push_back({kCompanions, " and "});
  slots.push_back({kObjects, " with "});
  if (subjects_count >= 3) slots.push_back({kPlaces, " in "});
  if (subjects_count >= 4) slots.push_back({kTimes, " during "});
  return slots;
}

}  // namespace detail

inline std::uint64_t promptpool_capacity(int subjects_count) {
  require(subjects_count >= 2 && subjects_count <= 5, "subjects_count must lie in 2..5");
  std::uint64_t capacity = 1;
  for (const auto& s : detail::slots_for(subjects_count)) capacity *= s.words.size();
  return capacity;
}

/// `size` distinct captions with `subjects_count` subjects each, drawn
/// without replacement from fixed lexicons. Same seed, same list.
inline std::vector<std::string> combinatorial_promptpool(int subjects_count, std::uint64_t seed, std::size_t size) {
  const std::uint64_t capacity = promptpool_capacity(subjects_count);
  require(size <= capacity, "requested " + std::to_string(size) + " prompts but only " + std::to_string(capacity) +
                                " distinct " + std::to_string(subjects_count) + "-subject prompts exist");
  const auto slots = detail::slots_for(subjects_count);
  std::mt19937_64 rng(seed);
  // Sparse Fisher-Yates over [0, capacity).
  std::unordered_map<std::uint64_t, std::uint64_t> swapped;
  auto at = [&](std::uint64_t i) {
    auto it = swapped.find(i);
    return it == swapped.end() ? i : it->second;
  };
  std::vector<std::string> out;
  out.reserve(size);
  for (std::uint64_t i = 0; i < size; ++i) {
    const std::uint64_t j = i + rng() % (capacity - i);
    const std::uint64_t pick = at(j);
    swapped[j] = at(i);
    std::uint64_t index = pick;
    std::string caption;
    for (const auto& slot : slots) {
      caption += slot.connector;
      caption += slot.words[index % slot.words.size()];
      index /= slot.words.size();
    }
    out.push_back(std::move(caption));
  }
  return out;
}

}  // namespace dascore::benchmark
