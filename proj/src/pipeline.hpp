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

#ifndef CARTOMAP_PIPELINE_HPP
#define CARTOMAP_PIPELINE_HPP

#include <array>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "corpus.hpp"
#include "json.hpp"

namespace cartomap {

enum class Stage { Ingest, Vectorize, Embed, Knn, Project, Cluster, Export, Raster, Index };

inline constexpr std::array<Stage, 9> kStages = {Stage::Ingest,  Stage::Vectorize, Stage::Embed,
                                                 Stage::Knn,     Stage::Project,   Stage::Cluster,
                                                 Stage::Export,  Stage::Raster,    Stage::Index};

std::string_view stage_name(Stage s);
std::optional<Stage> parse_stage(std::string_view name);

// Configuration as a key tree. Every key has a default; files and overrides
// may only touch known keys and must keep each value's type.
class PipelineConfig {
 public:
  PipelineConfig();

  static const nlohmann::json& defaults();
  static PipelineConfig from_file(const std::filesystem::path& path);

  void merge(const nlohmann::json& patch);
  // "project.epochs=100", "cluster.ks=[3]", "input.path=docs.csv".
  void set(std::string_view assignment);
  void set(std::string_view dotted_key, std::string_view value);

  const nlohmann::json& tree() const { return tree_; }
  const nlohmann::json& at(std::string_view dotted_key) const;

  std::filesystem::path output() const;
  std::filesystem::path input() const;
  ColumnMapping columns() const;

 private:
  nlohmann::json tree_;
};

struct StageReport {
  Stage stage = Stage::Ingest;
  bool executed = false;  // false: skipped on a hash match
  double seconds = 0.0;
  std::vector<std::pair<std::string, double>> timings;
  std::string input_hash;
};

using LogSink = std::function<void(const std::string&)>;
LogSink stderr_log();

class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config, LogSink log = stderr_log());

  // Runs one stage. Unless forced, a stage whose recorded input hash matches
  // and whose outputs are intact is skipped.
  StageReport run(Stage stage, bool force = false);
  std::vector<StageReport> run_all(bool force = false);

  const PipelineConfig& config() const { return config_; }
  std::filesystem::path stage_dir(Stage s) const;
  std::filesystem::path manifest_path(Stage s) const;

 private:
  struct Context;

  std::vector<std::filesystem::path> stage_inputs(Stage s) const;
  nlohmann::json stage_params(Stage s) const;
  void execute(Stage s, Context& ctx);

  void do_ingest(Context& ctx);
  void do_vectorize(Context& ctx);
  void do_embed(Context& ctx);
  void do_knn(Context& ctx);
  void do_project(Context& ctx);
  void do_cluster(Context& ctx);
  void do_export(Context& ctx);
  void do_raster(Context& ctx);
  void do_index(Context& ctx);

  PipelineConfig config_;
  LogSink log_;
};

// Writes a synthetic corpus to `csv` and its ground truth (doc_id, topic)
// next to it as <csv>.topics.tsv.
SyntheticCorpus write_synth_corpus(const PipelineConfig& config, const std::filesystem::path& csv);

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace cartomap

#endif  // CARTOMAP_PIPELINE_HPP
