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

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "dascore/backend/client.hpp"
#include "dascore/backend/transport.hpp"
#include "dascore/core/error.hpp"
#include "dascore/core/json.hpp"
#include "dascore/core/types.hpp"
#include "dascore/decompose/decompose.hpp"
#include "dascore/generate/generate.hpp"
#include "dascore/refine/refine.hpp"
#include "dascore/sim/sim.hpp"
#include "dascore/store/cache.hpp"
#include "dascore/store/ledger.hpp"
#include "dascore/vqa/vqa.hpp"

namespace dascore::service {

/// Backend spec strings:
///   "sim"                  in-process simulator
///   "http://host:port"     a real backend
///   "sim+http://host:port" a served simulator (also receives world registrations)
struct BackendUrls {
  std::string decompose = "sim";
  std::string vqa = "sim";
  std::string generate = "sim";

  static BackendUrls all(const std::string& spec) { return {spec, spec, spec}; }
};

enum class DecomposerMode { kLlm, kFallback };

inline DecomposerMode parse_decomposer_mode(std::string_view text) {
  if (text == "llm") return DecomposerMode::kLlm;
  if (text == "fallback") return DecomposerMode::kFallback;
  throw InvalidArgument("decomposer must be 'llm' or 'fallback' (got '" + std::string(text) + "')");
}

struct EngineConfig {
  BackendUrls backends;
  std::uint64_t sim_seed = 0;
  sim::Coefficients sim_coeff;
  RefinementConfig refinement;
  std::optional<std::vector<double>> lambdas;
  std::filesystem::path cache_dir;   // empty: in-memory
  std::filesystem::path ledger_dir;  // empty: in-memory
  std::size_t concurrency = 4;
  std::filesystem::path exemplars_path;  // empty: default data file
  DecomposerMode decomposer = DecomposerMode::kLlm;
  std::string bearer_token;
};

inline void validate(const EngineConfig& cfg) {
  validate(cfg.refinement);
  require(cfg.concurrency >= 1, "concurrency must be >= 1");
  require(cfg.sim_coeff.kappa >= 0.0, "sim kappa must be >= 0");
  if (cfg.lambdas) {
    for (double l : *cfg.lambdas) require(std::isfinite(l) && l >= 0.0, "lambdas must be finite and >= 0");
  }
}

inline bool is_sim_spec(std::string_view spec) { return spec == "sim" || spec.starts_with("sim+"); }

/// Random 128-bit hex id.
inline std::string new_session_id() {
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  char buffer[33];
  std::snprintf(buffer, sizeof buffer, "%016llx%016llx", static_cast<unsigned long long>(rng()),
                static_cast<unsigned long long>(rng()));
  return buffer;
}

/// One place that wires transports, cache, ledger, and the three services
/// together. The CLI and the HTTP API both go through it, so they produce
/// the same bytes for the same inputs.
class Engine {
 public:
  explicit Engine(EngineConfig cfg) : cfg_(std::move(cfg)) {
    validate(cfg_);
    cache_ = cfg_.cache_dir.empty() ? std::shared_ptr<store::Cache>(std::make_shared<store::MemoryCache>())
                                    : std::make_shared<store::DirectoryCache>(cfg_.cache_dir);
    ledger_ = cfg_.ledger_dir.empty() ? std::shared_ptr<store::Ledger>(std::make_shared<store::MemoryLedger>())
                                      : std::make_shared<store::FileLedger>(cfg_.ledger_dir);
    images_ = std::make_shared<backend::ImageStore>();
    decompose_ = make_client(cfg_.backends.decompose);
    vqa_ = make_client(cfg_.backends.vqa);
    generate_ = make_client(cfg_.backends.generate);
    scorer_ = std::make_unique<vqa::Scorer>(vqa_, images_, cfg_.concurrency);
    generator_ = std::make_unique<generate::Generator>(generate_, images_);
    if (cfg_.decomposer == DecomposerMode::kLlm) {
      exemplars_ = decompose::load_exemplars(cfg_.exemplars_path.empty() ? decompose::default_exemplar_path()
                                                                          : cfg_.exemplars_path);
    }
  }

  const EngineConfig& config() const noexcept { return cfg_; }
  const std::shared_ptr<store::Ledger>& ledger() const noexcept { return ledger_; }
  const std::shared_ptr<store::Cache>& cache() const noexcept { return cache_; }
  const std::shared_ptr<backend::ImageStore>& images() const noexcept { return images_; }
  /// The in-process simulator, when any backend is "sim".
  const std::shared_ptr<sim::SimBackend>& sim() const noexcept { return sim_; }

  /// Calls that actually reached a backend (cache misses).
  std::size_t backend_calls() const {
    return decompose_->backend_calls() + vqa_->backend_calls() + generate_->backend_calls();
  }

  Decomposition decompose(const Prompt& prompt, std::string_view session_id = {}) {
    const bool fallback = cfg_.decomposer == DecomposerMode::kFallback;
    Decomposition d = fallback ? decompose::fallback_decompose(prompt)
                               : decompose::decompose_with_backend(*decompose_, prompt, *exemplars_, session_id);
    if (fallback) {
      refine::detail::record(ledger_.get(), session_id, store::EntryKind::kDecompose,
                             Json{{"decomposer", "fallback"}, {"decomposition", to_json(d)}});
    }
    register_world(d);
    return d;
  }

  /// Single scoring pass. Uses `decomposition` when given, else decomposes.
  AlignmentReport evaluate(const Prompt& prompt, const ImageRef& image,
                           const std::optional<Decomposition>& decomposition = std::nullopt,
                           const std::optional<std::vector<double>>& lambdas = std::nullopt,
                           std::optional<double> tau = std::nullopt, std::string_view session_id = {}) {
    if (decomposition) {
      validate(*decomposition);
      register_world(*decomposition);
    }
    const Decomposition d = decomposition ? *decomposition : decompose(prompt, session_id);
    images_->put(image);
    RefinementConfig cfg = cfg_.refinement;
    if (tau) cfg.tau = *tau;
    return refine::evaluate_only(prompt, image, d, lambdas ? lambdas : cfg_.lambdas, cfg, *scorer_, session_id);
  }

  /// Full refinement session.
  refine::RefinementOutcome refine(const Prompt& prompt, const std::optional<RefinementConfig>& cfg = std::nullopt,
                                   const std::optional<std::vector<double>>& lambdas = std::nullopt,
                                   std::string_view session_id = {}) {
    const Decomposition d = decompose(prompt, session_id);
    const refine::Services services{*generator_, *scorer_, ledger_.get()};
    return refine::run_refinement(prompt, d, lambdas ? lambdas : cfg_.lambdas, cfg ? *cfg : cfg_.refinement,
                                  services, session_id);
  }

  std::vector<store::LedgerEntry> session(std::string_view session_id) const { return ledger_->session(session_id); }

 private:
  std::shared_ptr<backend::Client> make_client(const std::string& spec) {
    std::shared_ptr<backend::Transport> transport;
    if (spec == "sim") {
      if (!sim_) sim_ = std::make_shared<sim::SimBackend>(cfg_.sim_seed, cfg_.sim_coeff);
      transport = std::make_shared<sim::SimTransport>(sim_);
    } else {
      backend::HttpOptions options;
      options.bearer_token = cfg_.bearer_token;
      const std::string url = spec.starts_with("sim+") ? spec.substr(4) : spec;
      transport = std::make_shared<backend::HttpTransport>(url, options);
    }
    return std::make_shared<backend::Client>(std::move(transport), cache_, ledger_);
  }

  // A simulator has to know which questions belong to which assertion.
  // Registration is bookkeeping, so it bypasses cache and ledger.
  void register_world(const Decomposition& d) {
    const Json body{{"decomposition", to_json(d)}};
    if (cfg_.backends.vqa == "sim" || cfg_.backends.generate == "sim") sim_->register_decomposition(d);
    if (is_sim_spec(cfg_.backends.vqa) && cfg_.backends.vqa != "sim") {
      vqa_->post_uncached(backend::kSimRegisterEndpoint, body);
    }
    if (is_sim_spec(cfg_.backends.generate) && cfg_.backends.generate != "sim" &&
        cfg_.backends.generate != cfg_.backends.vqa) {
      generate_->post_uncached(backend::kSimRegisterEndpoint, body);
    }
  }

  EngineConfig cfg_;
  std::shared_ptr<store::Cache> cache_;
  std::shared_ptr<store::Ledger> ledger_;
  std::shared_ptr<backend::ImageStore> images_;
  std::shared_ptr<sim::SimBackend> sim_;
  std::shared_ptr<backend::Client> decompose_;
  std::shared_ptr<backend::Client> vqa_;
  std::shared_ptr<backend::Client> generate_;
  std::unique_ptr<vqa::Scorer> scorer_;
  std::unique_ptr<generate::Generator> generator_;
  std::optional<decompose::ExemplarSet> exemplars_;
};

}  // namespace dascore::service
