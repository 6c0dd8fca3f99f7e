// Copyright 2026 The Cartomap Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end. Talks to the engine only through the C API.

#include <csignal>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cartomap/cartomap.h"
#include "json.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUser = 1;
constexpr int kExitInternal = 2;

int exit_code(cm_status s) {
  if (s == CM_OK) return kExitOk;
  return s == CM_ERR_INTERNAL ? kExitInternal : kExitUser;
}

struct CliFailure {
  cm_status status;
};

void check(cm_status s) {
  if (s != CM_OK) throw CliFailure{s};
}

class Config {
 public:
  Config() { check(cm_config_new(&ptr_)); }
  explicit Config(const std::string& path) { check(cm_config_load(path.c_str(), &ptr_)); }
  ~Config() { cm_config_free(ptr_); }
  Config(const Config&) = delete;
  Config& operator=(const Config&) = delete;

  void set(const std::string& assignment) { check(cm_config_set(ptr_, assignment.c_str())); }
  std::string get(const std::string& key) const {
    char* out = nullptr;
    check(cm_config_get(ptr_, key.c_str(), &out));
    std::string s(out);
    cm_free(out);
    return s;
  }
  std::string get_text(const std::string& key) const { return nlohmann::json::parse(get(key)).get<std::string>(); }
  std::string dump() const {
    char* out = nullptr;
    check(cm_config_to_json(ptr_, &out));
    std::string s(out);
    cm_free(out);
    return s;
  }
  const cm_config* get() const { return ptr_; }

 private:
  cm_config* ptr_ = nullptr;
};

cm_server* g_server = nullptr;

void on_signal(int) {
  if (g_server) cm_server_stop(g_server);
}

void print_reports(const std::string& json_text) {
  const auto reports = nlohmann::json::parse(json_text);
  std::printf("%-10s %-9s %9s\n", "stage", "status", "seconds");
  double total = 0.0;
  for (const auto& r : reports) {
    const double secs = r["seconds"].get<double>();
    total += secs;
    std::printf("%-10s %-9s %9.3f\n", r["stage"].get<std::string>().c_str(),
                r["executed"].get<bool>() ? "ran" : "skipped", secs);
    for (const auto& [name, t] : r["timings"].items()) std::printf("  %-22s %9.3f\n", name.c_str(), t.get<double>());
  }
  if (reports.size() > 1) std::printf("%-20s %9.3f\n", "total", total);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cartomap: turn a document corpus into a browsable semantic map"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::string> input, output;
  std::optional<std::uint64_t> seed;
  bool force = false, quiet = false;
  app.add_option("-c,--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("-s,--set", overrides, "Override a config key, e.g. --set knn.k=15 (repeatable)");
  app.add_option("-i,--input", input, "Input corpus CSV (input.path)");
  app.add_option("-o,--output", output, "Output directory (output)");
  app.add_option("--seed", seed, "Random seed for every stage (seed)");
  app.add_flag("-f,--force", force, "Rerun stages even when their inputs are unchanged");
  app.add_flag("-q,--quiet", quiet, "Only print errors");

  size_t n_stages = 0;
  const char* const* stage_names = cm_stage_names(&n_stages);
  std::vector<CLI::App*> stage_cmds;
  for (size_t i = 0; i < n_stages; ++i) {
    stage_cmds.push_back(app.add_subcommand(stage_names[i], std::string("Run the ") + stage_names[i] + " stage"));
  }
  auto* run_all = app.add_subcommand("run-all", "Run every stage in order, skipping up-to-date ones");

  auto* serve = app.add_subcommand("serve", "Serve a pipeline output directory over HTTP");
  std::optional<std::string> data_dir, host;
  std::optional<std::uint64_t> port, cache_size, workers;
  serve->add_option("--data", data_dir, "Directory to serve (defaults to the output directory)");
  serve->add_option("--host", host, "Bind address (server.host)");
  serve->add_option("-p,--port", port, "Port, 0 for any free port (server.port)");
  serve->add_option("--cache-size", cache_size, "Filtered tile cache entries (server.cache_size)");
  serve->add_option("--workers", workers, "Background render workers, 0 for one per core (server.workers)");

  auto* synth = app.add_subcommand("synth", "Write a synthetic corpus with known topics");
  std::optional<std::uint64_t> topics, docs, topic_vocab, shared_vocab, synth_seed;
  synth->add_option("--topics", topics, "Number of topics (synth.topics)");
  synth->add_option("--docs-per-topic", docs, "Documents per topic (synth.docs_per_topic)");
  synth->add_option("--topic-vocab", topic_vocab, "Words per topic vocabulary (synth.topic_vocab)");
  synth->add_option("--shared-vocab", shared_vocab, "Shared noise words (synth.shared_vocab)");
  synth->add_option("--synth-seed", synth_seed, "Generator seed (synth.seed)");

  auto* show = app.add_subcommand("config", "Print the effective configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUser;
  }

  try {
    std::unique_ptr<Config> cfg = config_path.empty() ? std::make_unique<Config>() : std::make_unique<Config>(config_path);
    for (const auto& o : overrides) cfg->set(o);
    if (input) cfg->set("input.path=" + *input);
    if (output) cfg->set("output=" + *output);
    if (seed) cfg->set("seed=" + std::to_string(*seed));
    if (host) cfg->set("server.host=" + *host);
    if (port) cfg->set("server.port=" + std::to_string(*port));
    if (cache_size) cfg->set("server.cache_size=" + std::to_string(*cache_size));
    if (workers) cfg->set("server.workers=" + std::to_string(*workers));
    if (topics) cfg->set("synth.topics=" + std::to_string(*topics));
    if (docs) cfg->set("synth.docs_per_topic=" + std::to_string(*docs));
    if (topic_vocab) cfg->set("synth.topic_vocab=" + std::to_string(*topic_vocab));
    if (shared_vocab) cfg->set("synth.shared_vocab=" + std::to_string(*shared_vocab));
    if (synth_seed) cfg->set("synth.seed=" + std::to_string(*synth_seed));

    cm_log_fn log = nullptr;
    if (!quiet) log = [](const char* m, void*) { std::fprintf(stderr, "cartomap: %s\n", m); };

    std::string stage;
    for (auto* cmd : stage_cmds) {
      if (cmd->parsed()) stage = cmd->get_name();
    }
    if (run_all->parsed()) stage = "run-all";
    if (!stage.empty()) {
      char* report = nullptr;
      check(cm_run(cfg->get(), stage.c_str(), force ? 1 : 0, log, nullptr, &report));
      if (!quiet) print_reports(report);
      cm_free(report);
      return kExitOk;
    }

    if (synth->parsed()) {
      const auto path = cfg->get_text("input.path");
      if (path.empty()) {
        std::cerr << "cartomap: synth needs --input (the CSV to write)\n";
        return kExitUser;
      }
      check(cm_synth(cfg->get(), path.c_str()));
      if (!quiet) std::fprintf(stderr, "cartomap: wrote %s and %s.topics.tsv\n", path.c_str(), path.c_str());
      return kExitOk;
    }

    if (show->parsed()) {
      std::cout << cfg->dump() << "\n";
      return kExitOk;
    }

    if (serve->parsed()) {
      const auto dir = data_dir.value_or(cfg->get_text("output"));
      check(cm_server_open(cfg->get(), dir.c_str(), &g_server));
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      if (!quiet) {
        std::fprintf(stderr, "cartomap: serving %s on http://%s:%s\n", dir.c_str(), cfg->get_text("server.host").c_str(),
                     cfg->get("server.port").c_str());
      }
      const auto s = cm_server_run(g_server);
      cm_server* server = g_server;
      g_server = nullptr;
      cm_server_free(server);
      check(s);
      return kExitOk;
    }
  } catch (const CliFailure& f) {
    std::cerr << "cartomap: error: " << cm_last_error() << "\n";
    return exit_code(f.status);
  } catch (const std::exception& e) {
    std::cerr << "cartomap: internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUser;
}
