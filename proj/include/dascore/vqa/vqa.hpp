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
#include <atomic>
#include <exception>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "dascore/backend/client.hpp"
#include "dascore/backend/protocol.hpp"
#include "dascore/core/image.hpp"
#include "dascore/core/json.hpp"
#include "dascore/core/score.hpp"
#include "dascore/core/types.hpp"

namespace dascore::vqa {

struct ScoredAssertion {
  VqaLogits logits;
  AssertionScore score;
};

/// Scores decompositions against images through a VQA backend.
class Scorer {
 public:
  Scorer(std::shared_ptr<backend::Client> client, std::shared_ptr<backend::ImageStore> images,
         std::size_t concurrency = 4)
      : client_(std::move(client)), images_(std::move(images)), concurrency_(std::max<std::size_t>(1, concurrency)) {
    require(client_ != nullptr, "scorer needs a VQA client");
    if (!images_) images_ = std::make_shared<backend::ImageStore>();
  }

  /// One yes/no question. The cache identity is (backend, image hash,
  /// question, tau); the wire body carries the image bytes when known and
  /// the hash reference otherwise.
  ScoredAssertion score_assertion(const ImageRef& image, const Assertion& assertion, double tau,
                                  std::string_view session_id = {}) const {
    require(!image.empty(), "image reference is empty");
    require(!assertion.question.empty(), "assertion question must be non-empty");
    require(std::isfinite(tau) && tau > 0.0, "tau must be finite and > 0");
    const ImageRef resolved = images_->resolve(image);
    backend::VqaWireRequest wire;
    wire.question = assertion.question;
    wire.media_type = resolved.media_type();
    if (resolved.has_bytes()) {
      wire.image_b64 = util::base64_encode(resolved.bytes());
    } else {
      wire.image_ref = resolved.sha256();
    }
    const Json identity{{"image_sha256", resolved.sha256()}, {"question", assertion.question}, {"tau", tau}};
    const Json reply =
        client_->call(store::EntryKind::kVqa, backend::kVqaEndpoint, backend::to_json(wire), identity, session_id);
    const VqaLogits logits = backend::vqa_logits_from_response(reply);
    return ScoredAssertion{logits, assertion_alignment(logits, tau)};
  }

  /// Scores every assertion (up to `concurrency` at once) and combines them.
  /// Report order always follows assertion order. If any call fails, the
  /// error of the lowest failing index is rethrown and no report is built.
  AlignmentReport evaluate(const ImageRef& image, const Decomposition& decomposition,
                           std::optional<std::vector<double>> lambdas, double tau,
                           std::string_view session_id = {}) const {
    validate(decomposition);
    const std::size_t n = decomposition.size();
    std::vector<double> weights = lambdas ? std::move(*lambdas) : unit_lambdas(n);
    require(weights.size() == n, "lambdas must have one entry per assertion");

    std::vector<std::optional<ScoredAssertion>> results(n);
    std::vector<std::exception_ptr> errors(n);
    auto work = [&](std::size_t i) {
      try {
        results[i] = score_assertion(image, decomposition.assertions[i], tau, session_id);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    };

    const std::size_t workers = std::min(concurrency_, n);
    if (workers <= 1) {
      for (std::size_t i = 0; i < n; ++i) work(i);
    } else {
      std::atomic<std::size_t> next{0};
      std::vector<std::jthread> pool;
      pool.reserve(workers);
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
          for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) work(i);
        });
      }
    }
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }

    AlignmentReport report;
    report.lambdas = std::move(weights);
    for (const auto& r : results) {
      report.logits.push_back(r->logits);
      report.scores.push_back(r->score);
    }
    report.overall = combine(report.scores, report.lambdas);
    return report;
  }

  backend::ImageStore& images() const noexcept { return *images_; }
  const std::shared_ptr<backend::Client>& client() const noexcept { return client_; }

 private:
  std::shared_ptr<backend::Client> client_;
  std::shared_ptr<backend::ImageStore> images_;
  std::size_t concurrency_;
};

}  // namespace dascore::vqa
