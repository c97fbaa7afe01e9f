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
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dascore/core/error.hpp"
#include "dascore/core/image.hpp"
#include "dascore/core/types.hpp"

namespace dascore::benchmark {

enum class Realism { kEasy, kMedium, kHard, kVeryHard };

inline std::string_view to_string(Realism r) {
  switch (r) {
    case Realism::kEasy: return "easy";
    case Realism::kMedium: return "medium";
    case Realism::kHard: return "hard";
    case Realism::kVeryHard: return "very_hard";
  }
  return "easy";
}

inline std::optional<Realism> parse_realism(std::string_view text) {
  if (text == "easy") return Realism::kEasy;
  if (text == "medium") return Realism::kMedium;
  if (text == "hard") return Realism::kHard;
  if (text == "very_hard" || text == "very hard") return Realism::kVeryHard;
  return std::nullopt;
}

inline constexpr Realism kAllRealism[] = {Realism::kEasy, Realism::kMedium, Realism::kHard, Realism::kVeryHard};

struct BenchmarkRecord {
  Prompt prompt;
  int subjects_count = 2;
  Realism realism = Realism::kEasy;
  std::string method_id;
  ImageRef image;
  int human_rating = 1;
  std::map<std::string, double> metric_scores;
};

enum class Verdict { kWin, kTie, kLose };

inline std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::kWin: return "win";
    case Verdict::kTie: return "tie";
    case Verdict::kLose: return "lose";
  }
  return "tie";
}

inline std::optional<Verdict> parse_verdict(std::string_view text) {
  if (text == "win") return Verdict::kWin;
  if (text == "tie") return Verdict::kTie;
  if (text == "lose" || text == "loss") return Verdict::kLose;
  return std::nullopt;
}

/// One pairwise judgement; `win` means method_a was preferred.
struct PairwiseRecord {
  Prompt prompt;
  std::string method_a;
  std::string method_b;
  Verdict verdict = Verdict::kTie;
};

inline void validate(const BenchmarkRecord& r) {
  require(r.human_rating >= 1 && r.human_rating <= 5, "human rating must lie in 1..5");
  require(r.subjects_count >= 2 && r.subjects_count <= 5, "subjects_count must lie in 2..5");
  require(!r.method_id.empty(), "method_id must be non-empty");
}

inline void validate(const PairwiseRecord& r) {
  require(!r.method_a.empty() && !r.method_b.empty(), "pairwise methods must be non-empty");
  require(r.method_a != r.method_b, "pairwise record compares a method with itself");
}

// --- human-rating metrics -------------------------------------------------------

/// Mean of (rating - 1) / 4 over ratings in 1..5.
inline double normalized_human_score(std::span<const int> ratings) {
  require(!ratings.empty(), "normalized human score needs at least one rating");
  double sum = 0.0;
  for (int r : ratings) {
    require(r >= 1 && r <= 5, "human rating must lie in 1..5");
    sum += static_cast<double>(r - 1) / 4.0;
  }
  return sum / static_cast<double>(ratings.size());
}

/// Fraction of ratings equal to 5.
inline double alignment_accuracy(std::span<const int> ratings) {
  require(!ratings.empty(), "alignment accuracy needs at least one rating");
  std::size_t hits = 0;
  for (int r : ratings) {
    require(r >= 1 && r <= 5, "human rating must lie in 1..5");
    if (r == 5) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(ratings.size());
}

inline std::vector<int> ratings_of(std::span<const BenchmarkRecord> records) {
  std::vector<int> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.human_rating);
  return out;
}

inline double normalized_human_score(std::span<const BenchmarkRecord> records) {
  return normalized_human_score(ratings_of(records));
}

inline double alignment_accuracy(std::span<const BenchmarkRecord> records) {
  return alignment_accuracy(ratings_of(records));
}

struct PairwiseSummary {
  std::size_t count = 0;
  double win = 0.0;  // percent
  double tie = 0.0;
  double lose = 0.0;
};

inline PairwiseSummary pairwise_summary(std::span<const Verdict> verdicts) {
  require(!verdicts.empty(), "pairwise summary needs at least one verdict");
  std::size_t win = 0, tie = 0, lose = 0;
  for (auto v : verdicts) {
    if (v == Verdict::kWin) ++win;
    else if (v == Verdict::kTie) ++tie;
    else ++lose;
  }
  const double n = static_cast<double>(verdicts.size());
  return PairwiseSummary{verdicts.size(), 100.0 * static_cast<double>(win) / n,
                         100.0 * static_cast<double>(tie) / n, 100.0 * static_cast<double>(lose) / n};
}

inline PairwiseSummary pairwise_summary(std::span<const PairwiseRecord> records) {
  std::vector<Verdict> verdicts;
  verdicts.reserve(records.size());
  for (const auto& r : records) verdicts.push_back(r.verdict);
  return pairwise_summary(verdicts);
}

// --- correlation ---------------------------------------------------------------

enum class CorrelationMethod { kPearson, kSpearman };

inline std::string_view to_string(CorrelationMethod m) {
  return m == CorrelationMethod::kPearson ? "pearson" : "spearman";
}

enum class GroupBy { kNone, kSubjectsCount, kRealism };

inline std::string_view to_string(GroupBy g) {
  switch (g) {
    case GroupBy::kNone: return "none";
    case GroupBy::kSubjectsCount: return "subjects_count";
    case GroupBy::kRealism: return "realism";
  }
  return "none";
}

class UndefinedCorrelation : public Error {
 public:
  explicit UndefinedCorrelation(const std::string& message) : Error(ErrorCode::kUndefinedCorrelation, message) {}
};

inline double pearson(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), "correlation series must have equal length");
  require(x.size() >= 3, "correlation needs at least 3 observations");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw UndefinedCorrelation("correlation is undefined for a constant series");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// 1-based ranks; tied values share the mean of the ranks they span.
inline std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

/// Pearson correlation of average ranks.
inline double spearman(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), "correlation series must have equal length");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

inline double correlate(std::span<const double> x, std::span<const double> y, CorrelationMethod method) {
  return method == CorrelationMethod::kPearson ? pearson(x, y) : spearman(x, y);
}

struct GroupCorrelation {
  std::size_t n = 0;
  std::optional<double> value;
  std::string error;  // set when value is absent
};

/// Correlation between one metric column and the human ratings, per group.
/// A group that is too small or constant gets an error entry instead of a
/// value; it does not abort the other groups.
inline std::map<std::string, GroupCorrelation> correlation(std::string_view metric_name,
                                                           std::span<const BenchmarkRecord> records,
                                                           CorrelationMethod method, GroupBy group_by) {
  std::map<std::string, std::vector<const BenchmarkRecord*>> groups;
  for (const auto& r : records) {
    auto it = r.metric_scores.find(std::string(metric_name));
    if (it == r.metric_scores.end()) {
      throw InvalidArgument("record for '" + r.prompt.text() + "' (" + r.method_id + ") lacks metric '" +
                            std::string(metric_name) + "'");
    }
    std::string key = "all";
    if (group_by == GroupBy::kSubjectsCount) key = "subjects_count=" + std::to_string(r.subjects_count);
    if (group_by == GroupBy::kRealism) key = "realism=" + std::string(to_string(r.realism));
    groups[key].push_back(&r);
  }
  std::map<std::string, GroupCorrelation> out;
  for (const auto& [key, members] : groups) {
    std::vector<double> metric, rating;
    for (const auto* r : members) {
      metric.push_back(r->metric_scores.at(std::string(metric_name)));
      rating.push_back(static_cast<double>(r->human_rating));
    }
    GroupCorrelation g;
    g.n = members.size();
    try {
      g.value = correlate(metric, rating, method);
    } catch (const Error& e) {
      g.error = e.what();
    }
    out[key] = std::move(g);
  }
  return out;
}

}  // namespace dascore::benchmark
