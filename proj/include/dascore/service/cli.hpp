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

// The `dascore` command line. Every shared option may also come from a
// DASCORE_* environment variable; an explicit flag wins over the
// environment, which wins over the built-in default.

#pragma once

#include <csignal>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dascore/benchmark/dataset.hpp"
#include "dascore/benchmark/promptpool.hpp"
#include "dascore/core/error.hpp"
#include "dascore/core/json.hpp"
#include "dascore/refine/refine.hpp"
#include "dascore/service/engine.hpp"
#include "dascore/service/http_api.hpp"
#include "dascore/sim/server.hpp"

namespace dascore::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 2;

/// Options shared by all subcommands, as parsed (unset means "not given").
struct SharedOptions {
  std::string backend;
  std::string decompose_backend;
  std::string vqa_backend;
  std::string generate_backend;
  bool sim = false;
  std::uint64_t sim_seed = 0;
  double sim_kappa = 0.0;
  std::optional<double> tau;
  std::optional<int> k;
  std::optional<double> threshold;
  std::optional<double> delta_w;
  std::optional<double> delta_gamma;
  std::optional<std::string> mode;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> lambda;
  std::string cache_dir;
  std::string ledger_dir;
  std::string listen = "127.0.0.1:8080";
  std::string decomposer = "llm";
  std::string exemplars;
  std::size_t concurrency = 4;
  std::string token;
};

inline std::vector<double> parse_lambda_list(std::string_view text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find(',', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string item(dascore::detail::trim(text.substr(start, end - start)));
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw InvalidArgument("--lambda expects comma-separated numbers (bad item '" + item + "')");
    }
    start = end + 1;
  }
  return out;
}

inline RefinementConfig refinement_config(const SharedOptions& o) {
  RefinementConfig cfg;
  if (o.tau) cfg.tau = *o.tau;
  if (o.k) cfg.max_iterations = *o.k;
  if (o.threshold) cfg.threshold = *o.threshold;
  if (o.delta_w) cfg.delta_w = *o.delta_w;
  if (o.delta_gamma) cfg.delta_gamma = *o.delta_gamma;
  if (o.mode) cfg.mode = parse_mode(*o.mode);
  if (o.seed) cfg.generation.seed = *o.seed;
  validate(cfg);
  return cfg;
}

inline service::EngineConfig engine_config(const SharedOptions& o) {
  service::EngineConfig cfg;
  std::string all = o.sim ? std::string("sim") : o.backend;
  auto pick = [&](const std::string& specific) {
    const std::string spec = specific.empty() ? all : specific;
    if (spec.empty()) throw InvalidArgument("no backend configured: pass --backend URL or --sim");
    return spec;
  };
  cfg.backends.decompose = pick(o.decompose_backend);
  cfg.backends.vqa = pick(o.vqa_backend);
  cfg.backends.generate = pick(o.generate_backend);
  cfg.sim_seed = o.sim_seed;
  cfg.sim_coeff.kappa = o.sim_kappa;
  cfg.refinement = refinement_config(o);
  if (o.lambda) cfg.lambdas = parse_lambda_list(*o.lambda);
  cfg.cache_dir = o.cache_dir;
  cfg.ledger_dir = o.ledger_dir;
  cfg.concurrency = o.concurrency;
  cfg.exemplars_path = o.exemplars;
  cfg.decomposer = service::parse_decomposer_mode(o.decomposer);
  cfg.bearer_token = o.token;
  return cfg;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("cannot write " + path.string());
}

/// Sends `text` to stdout, or to `out_path` when one was given.
inline void emit(std::ostream& out, const std::string& out_path, const std::string& text) {
  if (out_path.empty()) {
    out << text;
  } else {
    write_file(out_path, text);
  }
}

inline std::string extension_for(std::string_view media_type) {
  if (media_type == "image/png") return ".png";
  if (media_type == "image/jpeg") return ".jpg";
  if (media_type == "image/webp") return ".webp";
  if (media_type == sim::kMediaType) return ".simimg";
  return ".bin";
}

inline std::string fixed(double value, int digits = 4) { return benchmark::detail::fixed(value, digits); }

inline std::string report_table(const Decomposition& d, const AlignmentReport& report) {
  std::ostringstream out;
  out << "i  u        yes      no       question\n";
  for (std::size_t i = 0; i < report.scores.size(); ++i) {
    out << benchmark::detail::pad(std::to_string(i), 3) << benchmark::detail::pad(fixed(report.scores[i].value()), 9)
        << benchmark::detail::pad(fixed(report.logits[i].yes_logit, 3), 9)
        << benchmark::detail::pad(fixed(report.logits[i].no_logit, 3), 9) << d.assertions[i].question << "\n";
  }
  out << "overall " << fixed(report.overall) << "\n";
  return out.str();
}

/// One row per iteration: overall score and the assertion bumped next.
inline std::string refine_summary(const refine::RefinementOutcome& outcome) {
  std::ostringstream out;
  out << "k  overall  incremented\n";
  for (std::size_t i = 0; i < outcome.trace.size(); ++i) {
    const auto& r = outcome.trace[i];
    const bool last = i + 1 == outcome.trace.size();
    const std::string bumped = last ? "-" : std::to_string(select_least_aligned(r.report.scores));
    out << benchmark::detail::pad(std::to_string(r.k), 3) << benchmark::detail::pad(fixed(r.report.overall), 9)
        << bumped << "\n";
  }
  out << "stop_reason=" << refine::to_string(outcome.stop_reason) << " best_k=" << outcome.best_k
      << " best_image=" << outcome.best_image.sha256() << "\n";
  return out.str();
}

namespace detail {

inline void add_shared_options(CLI::App& app, SharedOptions& o) {
  app.add_option("--backend", o.backend, "Base URL for all backends, or 'sim'")->envname("DASCORE_BACKEND");
  app.add_option("--decompose-backend", o.decompose_backend, "Decomposition backend URL")
      ->envname("DASCORE_DECOMPOSE_BACKEND");
  app.add_option("--vqa-backend", o.vqa_backend, "VQA backend URL")->envname("DASCORE_VQA_BACKEND");
  app.add_option("--generate-backend", o.generate_backend, "Generation backend URL")
      ->envname("DASCORE_GENERATE_BACKEND");
  app.add_flag("--sim", o.sim, "Use the in-process simulator for every backend")->envname("DASCORE_SIM");
  app.add_option("--sim-seed", o.sim_seed, "Simulator world seed")->envname("DASCORE_SIM_SEED");
  app.add_option("--sim-kappa", o.sim_kappa, "Simulator interference coefficient")
      ->envname("DASCORE_SIM_KAPPA")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--tau", o.tau, "VQA temperature")->envname("DASCORE_TAU");
  app.add_option("--k", o.k, "Refinement iteration budget")->envname("DASCORE_K");
  app.add_option("--threshold", o.threshold, "Stop once the overall score reaches this")
      ->envname("DASCORE_THRESHOLD");
  app.add_option("--delta-w", o.delta_w, "Prompt-weight increment")->envname("DASCORE_DELTA_W");
  app.add_option("--delta-gamma", o.delta_gamma, "Attention-gain increment")->envname("DASCORE_DELTA_GAMMA");
  app.add_option("--mode", o.mode, "pw or pw_ca")->envname("DASCORE_MODE");
  app.add_option("--seed", o.seed, "Generation seed")->envname("DASCORE_SEED");
  app.add_option("--lambda", o.lambda, "Comma-separated assertion importance weights")->envname("DASCORE_LAMBDA");
  app.add_option("--cache-dir", o.cache_dir, "Response cache directory")->envname("DASCORE_CACHE_DIR");
  app.add_option("--ledger-dir", o.ledger_dir, "Run ledger directory")->envname("DASCORE_LEDGER_DIR");
  app.add_option("--listen", o.listen, "host:port for serve and sim-serve")->envname("DASCORE_LISTEN");
  app.add_option("--decomposer", o.decomposer, "llm or fallback")->envname("DASCORE_DECOMPOSER");
  app.add_option("--exemplars", o.exemplars, "Exemplar file for the LLM decomposer")->envname("DASCORE_EXEMPLARS");
  app.add_option("--concurrency", o.concurrency, "Concurrent VQA calls")
      ->envname("DASCORE_CONCURRENCY")
      ->check(CLI::PositiveNumber);
  app.add_option("--token", o.token, "Bearer token for backends and the API")->envname("DASCORE_TOKEN");
}

inline std::atomic<bool>& stop_requested() {
  static std::atomic<bool> flag{false};
  return flag;
}

extern "C" inline void on_signal(int) { stop_requested().store(true); }

template <typename Server>
void serve_until_signal(Server& server, const std::string& listen, std::ostream& err, std::string_view what) {
  const auto [host, port] = service::parse_listen(listen);
  const int bound = server.start(host, port);
  err << what << " listening on http://" << host << ":" << bound << std::endl;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!stop_requested().load()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
}

}  // namespace detail

/// Runs the command line. Returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Decompositional alignment scoring and iterative refinement"};
  app.name("dascore");
  app.require_subcommand(1);
  app.fallthrough();
  SharedOptions o;
  detail::add_shared_options(app, o);

  std::string prompt_text, image_path, decomposition_path, out_path, out_dir, dataset_path, session_id, format = "json";
  bool as_json = false;
  int subjects = 2;
  std::uint64_t pool_seed = 0;
  std::size_t pool_size = 10;

  auto* decompose_cmd = app.add_subcommand("decompose", "Split a prompt into assertions");
  decompose_cmd->add_option("prompt", prompt_text, "Prompt text")->required();
  decompose_cmd->add_option("--out", out_path, "Write to this file instead of stdout");

  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score an image against a prompt");
  evaluate_cmd->add_option("prompt", prompt_text, "Prompt text")->required();
  evaluate_cmd->add_option("image", image_path, "Image file")->required();
  evaluate_cmd->add_option("--decomposition", decomposition_path, "Decomposition JSON (skips decomposing)");
  evaluate_cmd->add_option("--format", format, "json or table")->check(CLI::IsMember({"json", "table"}));
  evaluate_cmd->add_option("--out", out_path, "Write to this file instead of stdout");

  auto* refine_cmd = app.add_subcommand("refine", "Generate with iterative refinement");
  refine_cmd->add_option("prompt", prompt_text, "Prompt text")->required();
  refine_cmd->add_option("--out-dir", out_dir, "Write outcome.json and the best image here");
  refine_cmd->add_flag("--json", as_json, "Print the outcome JSON instead of the summary");

  auto* benchmark_cmd = app.add_subcommand("benchmark", "Human-rating metrics and correlations");
  benchmark_cmd->add_option("dataset", dataset_path, "JSON Lines dataset")->required();
  benchmark_cmd->add_option("--out-dir", out_dir, "Write report.json and report.txt here");
  benchmark_cmd->add_flag("--json", as_json, "Print the JSON report instead of the table");

  auto* pool_cmd = app.add_subcommand("promptpool", "Offline combinatorial prompt pool");
  pool_cmd->add_option("--subjects", subjects, "Subjects per prompt (2..5)");
  pool_cmd->add_option("--pool-seed", pool_seed, "Sampling seed");
  pool_cmd->add_option("--size", pool_size, "Number of prompts");

  auto* replay_cmd = app.add_subcommand("replay", "Rebuild a session's outcome from the ledger");
  replay_cmd->add_option("session", session_id, "Session id")->required();

  auto* prune_cmd = app.add_subcommand("prune-cache", "Delete every cached response");
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP API");
  auto* sim_serve_cmd = app.add_subcommand("sim-serve", "Serve the simulator backend over HTTP");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitError;
  }

  try {
    if (*decompose_cmd) {
      service::Engine engine(engine_config(o));
      const auto d = engine.decompose(Prompt(prompt_text), service::new_session_id());
      emit(out, out_path, canonical(to_json(d)) + "\n");
    } else if (*evaluate_cmd) {
      if (!std::filesystem::is_regular_file(image_path)) throw IoError("image file not found: " + image_path);
      service::Engine engine(engine_config(o));
      const Prompt prompt(prompt_text);
      std::optional<Decomposition> d;
      if (!decomposition_path.empty()) d = decomposition_from_json(parse_json(read_file(decomposition_path)));
      const ImageRef image = ImageRef::from_bytes(read_file(image_path), guess_media_type(image_path));
      const std::string session = service::new_session_id();
      if (!d) d = engine.decompose(prompt, session);
      const auto report = engine.evaluate(prompt, image, d, std::nullopt, std::nullopt, session);
      emit(out, out_path, format == "table" ? report_table(*d, report) : canonical(to_json(report)) + "\n");
    } else if (*refine_cmd) {
      service::Engine engine(engine_config(o));
      const std::string session = service::new_session_id();
      refine::RefinementOutcome outcome;
      try {
        outcome = engine.refine(Prompt(prompt_text), std::nullopt, std::nullopt, session);
      } catch (const refine::RefinementError& e) {
        Json partial = Json::array();
        for (const auto& r : e.trace()) partial.push_back(refine::to_json(r));
        err << "partial trace: " << canonical(partial) << "\n";
        throw;
      }
      const std::string outcome_json = canonical(refine::to_json(outcome)) + "\n";
      if (!out_dir.empty()) {
        const std::filesystem::path dir(out_dir);
        write_file(dir / "outcome.json", outcome_json);
        const ImageRef best = engine.images()->resolve(outcome.best_image);
        if (best.has_bytes()) write_file(dir / ("best" + extension_for(best.media_type())), best.bytes());
      }
      out << (as_json ? outcome_json : refine_summary(outcome));
      err << "session " << session << "\n";
    } else if (*benchmark_cmd) {
      const auto data = benchmark::load_dataset(dataset_path);
      const Json report = benchmark::benchmark_report(data);
      const std::string report_json = canonical(report) + "\n";
      const std::string table = benchmark::render_report_table(report);
      if (!out_dir.empty()) {
        write_file(std::filesystem::path(out_dir) / "report.json", report_json);
        write_file(std::filesystem::path(out_dir) / "report.txt", table);
      }
      out << (as_json ? report_json : table);
    } else if (*pool_cmd) {
      for (const auto& p : benchmark::combinatorial_promptpool(subjects, pool_seed, pool_size)) out << p << "\n";
    } else if (*replay_cmd) {
      if (o.ledger_dir.empty()) throw InvalidArgument("replay needs --ledger-dir");
      store::FileLedger ledger(o.ledger_dir, false);
      out << canonical(refine::to_json(refine::replay_from_ledger(ledger, session_id))) << "\n";
    } else if (*prune_cmd) {
      if (o.cache_dir.empty()) throw InvalidArgument("prune-cache needs --cache-dir");
      store::DirectoryCache cache(o.cache_dir);
      out << "removed " << cache.prune() << " cached response(s)\n";
    } else if (*serve_cmd) {
      auto engine = std::make_shared<service::Engine>(engine_config(o));
      service::ApiServer server(engine, service::ApiOptions{o.token});
      detail::serve_until_signal(server, o.listen, err, "dascore api");
    } else if (*sim_serve_cmd) {
      sim::Coefficients coeff;
      coeff.kappa = o.sim_kappa;
      sim::SimServer server(std::make_shared<sim::SimBackend>(o.sim_seed, coeff));
      detail::serve_until_signal(server, o.listen, err, "dascore simulator");
    }
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return kExitError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error [io]: " << e.what() << "\n";
    return kExitError;
  }
  return kExitOk;
}

}  // namespace dascore::cli
