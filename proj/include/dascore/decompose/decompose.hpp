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

#include <cctype>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dascore/backend/client.hpp"
#include "dascore/backend/protocol.hpp"
#include "dascore/core/error.hpp"
#include "dascore/core/json.hpp"
#include "dascore/core/types.hpp"

namespace dascore::decompose {

struct Exemplar {
  Prompt prompt;
  Decomposition decomposition;
};

/// In-context examples for the decomposing LLM plus the task description
/// that precedes them.
struct ExemplarSet {
  std::vector<Exemplar> examples;
  std::string task_description;
};

inline void validate(const ExemplarSet& set) {
  require(!set.examples.empty(), "exemplar set must contain at least one example");
  require(!detail::trim(set.task_description).empty(), "exemplar task description must be non-empty");
  for (const auto& e : set.examples) dascore::validate(e.decomposition);
}

inline constexpr std::string_view kOutputSchema =
    "Answer with only a JSON array. Each element is an object with exactly the string fields "
    "\"assertion\", \"sub_prompt\", \"question\" and \"subject\", in the order the subjects "
    "appear in the caption.";

struct ChatMessage {
  std::string role;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct DecomposerRequest {
  Prompt prompt;
  std::vector<ChatMessage> messages;
  std::string output_schema;

  /// Flat single-string rendering for completion-style backends.
  std::string text() const {
    std::string out;
    for (const auto& m : messages) {
      out += m.role;
      out += ": ";
      out += m.content;
      out += "\n\n";
    }
    out += output_schema;
    out += "\n";
    return out;
  }
};

/// The array an LLM is asked to return, rendered canonically.
inline std::string render_assertions(const Decomposition& d) {
  Json list = Json::array();
  for (const auto& a : d.assertions) {
    list.push_back(Json{{"assertion", a.assertion_text},
                        {"sub_prompt", a.sub_prompt},
                        {"question", a.question},
                        {"subject", a.subject_token}});
  }
  return canonical(list);
}

inline ExemplarSet exemplars_from_json(const Json& j) {
  using namespace json_detail;
  ExemplarSet set;
  set.task_description = string_at(j, "task_description", "");
  const Json& examples = member(j, "examples", "");
  if (!examples.is_array()) throw ParseError("expected an array", "/examples");
  for (std::size_t i = 0; i < examples.size(); ++i) {
    auto d = decomposition_from_json(examples[i], "/examples/" + std::to_string(i));
    set.examples.push_back(Exemplar{d.prompt, std::move(d)});
  }
  validate(set);
  return set;
}

inline Json to_json(const ExemplarSet& set) {
  Json examples = Json::array();
  for (const auto& e : set.examples) {
    Json item = dascore::to_json(e.decomposition);
    item.erase("source");
    examples.push_back(std::move(item));
  }
  return Json{{"task_description", set.task_description}, {"examples", std::move(examples)}};
}

inline ExemplarSet load_exemplars(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read exemplar file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return exemplars_from_json(parse_json(buffer.str()));
}

/// Default exemplar file location: DASCORE_EXEMPLARS if set, otherwise the
/// data directory the build was configured with.
inline std::filesystem::path default_exemplar_path() {
  if (const char* env = std::getenv("DASCORE_EXEMPLARS"); env && *env) return env;
#ifdef DASCORE_DATA_DIR
  return std::filesystem::path(DASCORE_DATA_DIR) / "exemplars.json";
#else
  return "data/exemplars.json";
#endif
}

inline ExemplarSet default_exemplars() { return load_exemplars(default_exemplar_path()); }

/// System turn with the task, one user/assistant pair per exemplar, then the
/// target prompt verbatim as the final user turn.
inline DecomposerRequest build_decomposition_request(const Prompt& prompt, const ExemplarSet& exemplars) {
  validate(exemplars);
  DecomposerRequest request{prompt, {}, std::string(kOutputSchema)};
  request.messages.push_back({"system", exemplars.task_description + "\n" + std::string(kOutputSchema)});
  for (const auto& e : exemplars.examples) {
    request.messages.push_back({"user", e.prompt.text()});
    request.messages.push_back({"assistant", render_assertions(e.decomposition)});
  }
  request.messages.push_back({"user", prompt.text()});
  return request;
}

inline Json to_wire(const DecomposerRequest& request, const ExemplarSet& exemplars) {
  Json messages = Json::array();
  for (const auto& m : request.messages) messages.push_back(Json{{"role", m.role}, {"content", m.content}});
  Json j = to_json(exemplars);
  return Json{{"prompt", request.prompt.text()},
              {"schema_version", std::string(backend::kSchemaVersion)},
              {"exemplars", j["examples"]},
              {"task_description", j["task_description"]},
              {"output_schema", request.output_schema},
              {"messages", std::move(messages)}};
}

namespace detail {

/// End offset (one past the closing bracket) of the bracketed value starting
/// at `open`, honouring JSON string quoting, or npos when unbalanced.
inline std::size_t match_bracket(std::string_view text, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '[' || c == '{') {
      ++depth;
    } else if (c == ']' || c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

inline std::string excerpt(std::string_view text, std::size_t limit = 120) {
  if (text.size() <= limit) return std::string(text);
  return std::string(text.substr(0, limit)) + "...";
}

}  // namespace detail

/// Pulls the first JSON array out of an LLM reply (prose around it is
/// ignored) and validates each element. The result has source = llm.
inline Decomposition parse_decomposition(std::string_view raw, const Prompt& prompt) {
  std::optional<Json> array;
  for (std::size_t pos = raw.find('['); pos != std::string_view::npos; pos = raw.find('[', pos + 1)) {
    const std::size_t end = detail::match_bracket(raw, pos);
    if (end == std::string_view::npos) continue;
    try {
      Json candidate = Json::parse(raw.substr(pos, end - pos));
      if (candidate.is_array()) {
        array = std::move(candidate);
        break;
      }
    } catch (const Json::parse_error&) {
    }
  }
  if (!array) throw ParseError("no JSON array found in decomposition response", detail::excerpt(raw));
  if (array->empty()) throw ParseError("decomposition response is an empty array", detail::excerpt(raw));

  Decomposition d{prompt, {}, DecompositionSource::kLlm};
  for (std::size_t i = 0; i < array->size(); ++i) {
    const Json& item = (*array)[i];
    const std::string span = detail::excerpt(item.dump());
    auto field = [&](const char* key) -> std::string {
      if (!item.is_object() || !item.contains(key) || !item[key].is_string()) {
        throw ParseError(std::string("assertion ") + std::to_string(i) + " lacks string field '" + key + "'", span);
      }
      std::string value(dascore::detail::trim(item[key].get<std::string>()));
      if (value.empty()) {
        throw ParseError(std::string("assertion ") + std::to_string(i) + " has empty field '" + key + "'", span);
      }
      return value;
    };
    Assertion a;
    a.index = i;
    a.assertion_text = field("assertion");
    a.sub_prompt = field("sub_prompt");
    a.question = field("question");
    a.subject_token = field("subject");
    if (a.question.back() != '?') {
      throw ParseError("assertion " + std::to_string(i) + " question does not end with '?'", span);
    }
    d.assertions.push_back(std::move(a));
  }
  return d;
}

/// "there is X" -> "is there X?", "there are X" -> "are there X?", anything
/// else -> "is it true that <text>?".
inline std::string question_from_assertion(std::string_view assertion_text) {
  std::string text(dascore::detail::trim(assertion_text));
  while (!text.empty() && (text.back() == '.' || text.back() == '?' || text.back() == '!')) text.pop_back();
  require(!dascore::detail::trim(text).empty(), "assertion text must be non-empty");
  auto lowered = text;
  for (auto& c : lowered) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lowered.rfind("there is ", 0) == 0) return "is there " + text.substr(9) + "?";
  if (lowered.rfind("there are ", 0) == 0) return "are there " + text.substr(10) + "?";
  return "is it true that " + text + "?";
}

namespace detail {

struct Token {
  std::size_t begin;
  std::size_t end;  // exclusive, before any trailing comma
  bool comma_after;
  std::string word;  // lowercase, punctuation stripped
};

inline std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i >= text.size()) break;
    const std::size_t begin = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t end = i;
    bool comma = false;
    while (end > begin && (text[end - 1] == ',' || text[end - 1] == ';')) {
      comma = true;
      --end;
    }
    std::string word;
    for (std::size_t k = begin; k < end; ++k) {
      const unsigned char c = static_cast<unsigned char>(text[k]);
      if (std::isalnum(c) || c == '\'' || c == '-') word.push_back(static_cast<char>(std::tolower(c)));
    }
    if (end > begin) tokens.push_back({begin, end, comma, std::move(word)});
  }
  return tokens;
}

inline bool is_separator(std::string_view word) {
  return word == "and" || word == "with" || word == "on" || word == "in" || word == "by" ||
         word == "during";
}

inline bool is_function_word(std::string_view word) {
  static constexpr std::string_view kWords[] = {
      "a",   "an",  "the", "some", "his",  "her",  "its",   "their", "my",    "your",
      "our", "of",  "to",  "at",   "near", "under", "over", "for",   "from",  "this",
      "that", "these", "those", "is", "are", "very", "while"};
  for (auto w : kWords) {
    if (w == word) return true;
  }
  return is_separator(word);
}

inline std::string_view strip_trailing_punct(std::string_view text) {
  while (!text.empty() && std::ispunct(static_cast<unsigned char>(text.back())) && text.back() != '\'' &&
         text.back() != ')') {
    text.remove_suffix(1);
  }
  return text;
}

}  // namespace detail

/// Offline rule-based decomposer. Splits the prompt at commas and at the
/// words "and", "with", "on", "in", "by", "during" when a noun phrase
/// follows, and emits one "there is <fragment>" assertion per fragment.
/// Lossy by nature; every sub-prompt is a verbatim substring of the prompt.
inline Decomposition fallback_decompose(const Prompt& prompt) {
  const std::string& text = prompt.text();
  const auto tokens = detail::tokenize(text);

  struct Span {
    std::size_t first;
    std::size_t last;  // inclusive token index
  };
  std::vector<Span> fragments;
  std::optional<std::size_t> start;
  auto close = [&](std::size_t last) {
    if (start && *start <= last) fragments.push_back({*start, last});
    start.reset();
  };
  auto starts_noun_phrase = [&](std::size_t i) {
    return i < tokens.size() && !tokens[i].word.empty() && !detail::is_separator(tokens[i].word);
  };

  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto& tok = tokens[i];
    if (start && detail::is_separator(tok.word) && starts_noun_phrase(i + 1)) {
      close(i - 1);
      continue;
    }
    if (!start) {
      // Skip a connective directly after a comma split ("x, and y").
      if (!fragments.empty() && detail::is_separator(tok.word) && starts_noun_phrase(i + 1)) continue;
      start = i;
    }
    if (tok.comma_after && starts_noun_phrase(i + 1)) close(i);
  }
  if (start) close(tokens.size() - 1);

  Decomposition d{prompt, {}, DecompositionSource::kFallback};
  for (const auto& f : fragments) {
    std::string_view sub(text.data() + tokens[f.first].begin, tokens[f.last].end - tokens[f.first].begin);
    sub = detail::strip_trailing_punct(sub);
    if (sub.empty()) continue;
    std::string subject;
    for (std::size_t k = f.last + 1; k-- > f.first;) {
      if (!tokens[k].word.empty() && !detail::is_function_word(tokens[k].word)) {
        subject = tokens[k].word;
        break;
      }
    }
    if (subject.empty()) subject = tokens[f.last].word.empty() ? std::string(sub) : tokens[f.last].word;
    Assertion a;
    a.index = d.assertions.size();
    a.sub_prompt = std::string(sub);
    a.assertion_text = "there is " + a.sub_prompt;
    a.question = question_from_assertion(a.assertion_text);
    a.subject_token = std::move(subject);
    d.assertions.push_back(std::move(a));
  }
  if (d.assertions.empty()) {
    std::string whole(detail::strip_trailing_punct(text));
    if (whole.empty()) whole = text;
    Assertion a;
    a.sub_prompt = whole;
    a.assertion_text = "there is " + whole;
    a.question = question_from_assertion(a.assertion_text);
    a.subject_token = tokens.empty() || tokens.back().word.empty() ? whole : tokens.back().word;
    d.assertions.push_back(std::move(a));
  }
  return d;
}

/// Asks the decomposition backend and parses its reply.
inline Decomposition decompose_with_backend(backend::Client& client, const Prompt& prompt,
                                            const ExemplarSet& exemplars, std::string_view session_id) {
  const auto request = build_decomposition_request(prompt, exemplars);
  const Json body = to_wire(request, exemplars);
  const Json reply = client.call(store::EntryKind::kDecompose, backend::kDecomposeEndpoint, body, body, session_id);
  return parse_decomposition(backend::decompose_text_from_response(reply), prompt);
}

}  // namespace dascore::decompose
