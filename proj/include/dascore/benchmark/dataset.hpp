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

// Benchmark datasets are JSON Lines. A rating line:
//
//   {"prompt": "...", "subjects_count": 3, "realism": "hard", "method_id": "sd",
//    "image": "<sha256>", "human_rating": 4, "metric_scores": {"da_score": 0.71}}
//
// A pairwise line carries "kind": "pairwise":
//
//   {"kind": "pairwise", "prompt": "...", "method_a": "ours", "method_b": "sd",
//    "verdict": "win"}
//
// Blank lines are skipped.

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dascore/benchmark/metrics.hpp"
#include "dascore/core/error.hpp"
#include "dascore/core/json.hpp"

namespace dascore::benchmark {

struct Dataset {
  std::vector<BenchmarkRecord> ratings;
  std::vector<PairwiseRecord> pairwise;
};

namespace detail {

inline std::string line_path(std::size_t line, std::string_view field = {}) {
  std::string out = "line " + std::to_string(line);
  if (!field.empty()) out += ": /" + std::string(field);
  return out;
}

[[noreturn]] inline void schema_error(std::size_t line, std::string_view field, const std::string& message) {
  throw ParseError("line " + std::to_string(line) + ": " + message, line_path(line, field));
}

inline std::string string_field(const Json& j, std::string_view key, std::size_t line) {
  auto it = j.find(std::string(key));
  if (it == j.end()) schema_error(line, key, "missing field '" + std::string(key) + "'");
  if (!it->is_string() || dascore::detail::trim(it->get<std::string>()).empty()) {
    schema_error(line, key, "field '" + std::string(key) + "' must be a non-empty string");
  }
  return it->get<std::string>();
}

inline int int_field(const Json& j, std::string_view key, std::size_t line, int lo, int hi) {
  auto it = j.find(std::string(key));
  if (it == j.end()) schema_error(line, key, "missing field '" + std::string(key) + "'");
  if (!it->is_number_integer() || it->get<long long>() < lo || it->get<long long>() > hi) {
    schema_error(line, key,
                 "field '" + std::string(key) + "' must be an integer in " + std::to_string(lo) + ".." +
                     std::to_string(hi));
  }
  return it->get<int>();
}

inline BenchmarkRecord rating_from_json(const Json& j, std::size_t line) {
  BenchmarkRecord r{Prompt(string_field(j, "prompt", line)), 2, Realism::kEasy, {}, {}, 1, {}};
  r.subjects_count = int_field(j, "subjects_count", line, 2, 5);
  const auto realism = parse_realism(string_field(j, "realism", line));
  if (!realism) schema_error(line, "realism", "realism must be one of easy, medium, hard, very_hard");
  r.realism = *realism;
  r.method_id = string_field(j, "method_id", line);
  r.human_rating = int_field(j, "human_rating", line, 1, 5);

  auto image = j.find("image");
  if (image == j.end()) schema_error(line, "image", "missing field 'image'");
  if (image->is_string()) {
    if (!util::is_sha256_hex(image->get<std::string>())) {
      schema_error(line, "image", "image must be a lowercase hex SHA-256 digest");
    }
    r.image = ImageRef::from_hash(image->get<std::string>(), "");
  } else {
    try {
      r.image = image_ref_from_json(*image, "/image");
    } catch (const ParseError& e) {
      schema_error(line, e.span().substr(1), e.what());
    }
  }

  if (auto scores = j.find("metric_scores"); scores != j.end()) {
    if (!scores->is_object()) schema_error(line, "metric_scores", "metric_scores must be an object");
    for (const auto& [name, value] : scores->items()) {
      if (!value.is_number() || !std::isfinite(value.get<double>())) {
        schema_error(line, "metric_scores/" + name, "metric score '" + name + "' must be a finite number");
      }
      r.metric_scores[name] = value.get<double>();
    }
  }
  return r;
}

inline PairwiseRecord pairwise_from_json(const Json& j, std::size_t line) {
  PairwiseRecord r{Prompt(string_field(j, "prompt", line)), string_field(j, "method_a", line),
                   string_field(j, "method_b", line), Verdict::kTie};
  const auto verdict = parse_verdict(string_field(j, "verdict", line));
  if (!verdict) schema_error(line, "verdict", "verdict must be one of win, tie, lose");
  r.verdict = *verdict;
  if (r.method_a == r.method_b) schema_error(line, "method_b", "method_b must differ from method_a");
  return r;
}

}  // namespace detail

/// Parses a JSON Lines dataset. Errors name the 1-based line. A dataset
/// without any record is an error.
inline Dataset parse_dataset(std::string_view text) {
  Dataset out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(start, end - start);
    ++line_no;
    start = end + 1;
    if (dascore::detail::trim(line).empty()) {
      if (end == text.size()) break;
      continue;
    }
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw ParseError("line " + std::to_string(line_no) + ": invalid JSON: " + e.what(),
                       detail::line_path(line_no));
    }
    if (!j.is_object()) detail::schema_error(line_no, "", "each line must be a JSON object");
    try {
      const std::string kind = j.value("kind", std::string("rating"));
      if (kind == "pairwise") {
        out.pairwise.push_back(detail::pairwise_from_json(j, line_no));
      } else if (kind == "rating") {
        out.ratings.push_back(detail::rating_from_json(j, line_no));
      } else {
        detail::schema_error(line_no, "kind", "kind must be 'rating' or 'pairwise'");
      }
    } catch (const Json::type_error&) {
      detail::schema_error(line_no, "kind", "kind must be a string");
    } catch (const InvalidArgument& e) {
      // Prompt construction rejects blank text.
      detail::schema_error(line_no, "prompt", e.what());
    }
    if (end == text.size()) break;
  }
  if (out.ratings.empty() && out.pairwise.empty()) throw ParseError("dataset has no records", "line 0");
  return out;
}

inline Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_dataset(buffer.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.span());
  }
}

// --- report --------------------------------------------------------------------

inline Json to_json(const PairwiseSummary& s) {
  return Json{{"count", s.count}, {"win", s.win}, {"tie", s.tie}, {"lose", s.lose}};
}

/// Per-method human metrics, pairwise summaries, and metric/human
/// correlations (overall, by subject count, by realism).
inline Json benchmark_report(const Dataset& data) {
  Json report = Json::object();

  std::map<std::string, std::vector<BenchmarkRecord>> by_method;
  for (const auto& r : data.ratings) by_method[r.method_id].push_back(r);
  Json methods = Json::object();
  for (const auto& [method, records] : by_method) {
    Json m{{"count", records.size()},
           {"normalized_human_score", normalized_human_score(records)},
           {"alignment_accuracy", alignment_accuracy(records)}};
    Json by_realism = Json::object();
    for (Realism level : kAllRealism) {
      std::vector<int> ratings;
      for (const auto& r : records) {
        if (r.realism == level) ratings.push_back(r.human_rating);
      }
      if (!ratings.empty()) by_realism[std::string(to_string(level))] = alignment_accuracy(ratings);
    }
    m["accuracy_by_realism"] = std::move(by_realism);
    methods[method] = std::move(m);
  }
  report["methods"] = std::move(methods);

  std::map<std::string, std::vector<Verdict>> by_pair;
  for (const auto& p : data.pairwise) by_pair[p.method_a + " vs " + p.method_b].push_back(p.verdict);
  Json pairwise = Json::object();
  for (const auto& [pair, verdicts] : by_pair) pairwise[pair] = to_json(pairwise_summary(verdicts));
  report["pairwise"] = std::move(pairwise);

  std::set<std::string> metric_names;
  for (const auto& r : data.ratings) {
    for (const auto& [name, value] : r.metric_scores) metric_names.insert(name);
  }
  Json correlations = Json::object();
  for (const auto& name : metric_names) {
    std::vector<BenchmarkRecord> scored;
    for (const auto& r : data.ratings) {
      if (r.metric_scores.contains(name)) scored.push_back(r);
    }
    Json per_method = Json::object();
    for (auto method : {CorrelationMethod::kPearson, CorrelationMethod::kSpearman}) {
      Json groups = Json::object();
      for (auto group_by : {GroupBy::kNone, GroupBy::kSubjectsCount, GroupBy::kRealism}) {
        for (const auto& [key, g] : correlation(name, scored, method, group_by)) {
          Json entry{{"n", g.n}};
          if (g.value) entry["value"] = *g.value;
          else entry["error"] = g.error;
          groups[key] = std::move(entry);
        }
      }
      per_method[std::string(to_string(method))] = std::move(groups);
    }
    correlations[name] = std::move(per_method);
  }
  report["correlations"] = std::move(correlations);
  return report;
}

namespace detail {

inline std::string fixed(double value, int digits = 4) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.*f", digits, value);
  return buffer;
}

inline std::string pad(std::string text, std::size_t width) {
  if (text.size() < width) text.append(width - text.size(), ' ');
  return text;
}

}  // namespace detail

/// Plain-text rendering of `benchmark_report`.
inline std::string render_report_table(const Json& report) {
  std::ostringstream out;
  out << detail::pad("method", 24) << detail::pad("n", 6) << detail::pad("score", 10) << "accuracy\n";
  for (const auto& [method, m] : report.at("methods").items()) {
    out << detail::pad(method, 24) << detail::pad(std::to_string(m.at("count").get<std::size_t>()), 6)
        << detail::pad(detail::fixed(m.at("normalized_human_score").get<double>()), 10)
        << detail::fixed(m.at("alignment_accuracy").get<double>()) << "\n";
  }
  if (!report.at("pairwise").empty()) {
    out << "\n" << detail::pad("pair", 32) << detail::pad("n", 6) << detail::pad("win%", 10)
        << detail::pad("tie%", 10) << "lose%\n";
    for (const auto& [pair, s] : report.at("pairwise").items()) {
      out << detail::pad(pair, 32) << detail::pad(std::to_string(s.at("count").get<std::size_t>()), 6)
          << detail::pad(detail::fixed(s.at("win").get<double>(), 2), 10)
          << detail::pad(detail::fixed(s.at("tie").get<double>(), 2), 10) << detail::fixed(s.at("lose").get<double>(), 2)
          << "\n";
    }
  }
  for (const auto& [metric, methods] : report.at("correlations").items()) {
    out << "\n" << detail::pad("correlation: " + metric, 32) << detail::pad("n", 6) << detail::pad("pearson", 10)
        << "spearman\n";
    const Json& pearson_groups = methods.at("pearson");
    const Json& spearman_groups = methods.at("spearman");
    for (const auto& [group, entry] : pearson_groups.items()) {
      auto cell = [](const Json& e) { return e.contains("value") ? detail::fixed(e.at("value").get<double>()) : std::string("n/a"); };
      out << detail::pad("  " + group, 32) << detail::pad(std::to_string(entry.at("n").get<std::size_t>()), 6)
          << detail::pad(cell(entry), 10) << cell(spearman_groups.at(group)) << "\n";
    }
  }
  return out.str();
}

}  // namespace dascore::benchmark
