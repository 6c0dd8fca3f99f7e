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

#include "pipeline.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include "embed.hpp"
#include "facets.hpp"
#include "landmarks.hpp"
#include "neighbors.hpp"
#include "project2d.hpp"
#include "raster.hpp"
#include "snapshot.hpp"
#include "vectorize.hpp"

namespace cartomap {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::string_view kManifestFormat = "cartomap-stage/1";
constexpr std::string_view kCoordsMagic = "CMCOORD1";

constexpr std::array<std::string_view, 9> kStageNames = {"ingest",  "vectorize", "embed",  "knn",  "project",
                                                         "cluster", "export",    "raster", "index"};
// Output directory of each stage, relative to the run's output root.
constexpr std::array<std::string_view, 9> kStageDirs = {"ingest",  "vectorize", "embed",  "knn",  "project",
                                                        "cluster", "snapshot",  "layers", "index"};

const std::array<std::string, 4> kEmbeddingFiles = {"embed/articles.emb", "embed/words.emb", "embed/authors.emb",
                                                    "embed/labs.emb"};
const std::vector<std::string> kSnapshotFiles = {"snapshot/manifest.json", "snapshot/entities.jsonl",
                                                 "snapshot/geometry.bin", "snapshot/neighbors.bin",
                                                 "snapshot/clusters.json"};

json build_defaults() {
  return json::parse(R"({
    "input": {
      "path": "",
      "columns": {"doc_id": "id", "title": "title", "abstract": "abstract", "keywords": "keywords",
                  "year": "year", "domain": "domain", "authors": "authors", "labs": "labs", "views": "views"}
    },
    "output": "cartomap-out",
    "seed": 42,
    "ingest": {"min_docs": 3},
    "vectorize": {"m_min": 25, "n_max": 5, "v_cap": 64000, "language": "en"},
    "embed": {"d": 300, "oversampling": 10, "power_iterations": 4},
    "knn": {"k": 10, "ef": 128, "M": 16, "ef_construction": 200, "exact_below": 4000},
    "project": {"epochs": 200, "n_neighbors": 15, "min_dist": 0.1, "subset_fraction": 1.0, "max_fit": 200000},
    "cluster": {"ks": [8, 24, 72, 216]},
    "raster": {"zmax": 5, "sigma": 1.5, "layers": ["articles", "authors"]},
    "index": {"facets": ["type", "lab", "year", "term"]},
    "server": {"host": "127.0.0.1", "port": 8080, "cache_size": 512, "workers": 0},
    "synth": {"topics": 3, "docs_per_topic": 500, "topic_vocab": 50, "shared_vocab": 100, "seed": 7}
  })");
}

// Checks `value` against the shape of the default at `key` and returns it in
// canonical form (integers stored unsigned).
json conform(const json& def, const json& value, const std::string& key) {
  auto mismatch = [&](const char* want) -> json {
    fail(ErrorCode::InvalidArgument, "config key '" + key + "' expects " + want + ", got " + value.dump());
  };
  if (def.is_object()) {
    if (!value.is_object()) return mismatch("an object");
    json out = def;
    for (const auto& [k, v] : value.items()) {
      const auto sub = key.empty() ? k : key + "." + k;
      if (!def.contains(k)) fail(ErrorCode::InvalidArgument, "unknown config key '" + sub + "'");
      out[k] = conform(def[k], v, sub);
    }
    return out;
  }
  if (def.is_array()) {
    if (!value.is_array()) return mismatch("a list");
    json out = json::array();
    for (const auto& v : value) out.push_back(conform(def.at(0), v, key + "[]"));
    return out;
  }
  if (def.is_string()) return value.is_string() ? value : mismatch("a string");
  if (def.is_boolean()) return value.is_boolean() ? value : mismatch("true or false");
  if (def.is_number_float()) return value.is_number() ? json(value.get<double>()) : mismatch("a number");
  if (def.is_number_integer()) {
    if (!value.is_number_integer() || value.get<std::int64_t>() < 0) return mismatch("a non-negative integer");
    return json(value.get<std::uint64_t>());
  }
  return mismatch("a known value");
}

const json* find_key(const json& tree, std::string_view dotted) {
  const json* node = &tree;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted.find('.', start);
    const auto part = std::string(dotted.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start));
    if (!node->is_object() || !node->contains(part)) return nullptr;
    node = &(*node)[part];
    if (dot == std::string_view::npos) return node;
    start = dot + 1;
  }
}

std::uint64_t get_u64(const PipelineConfig& c, std::string_view key) { return c.at(key).get<std::uint64_t>(); }
double get_f64(const PipelineConfig& c, std::string_view key) { return c.at(key).get<double>(); }
std::string get_str(const PipelineConfig& c, std::string_view key) { return c.at(key).get<std::string>(); }
std::vector<std::string> get_strs(const PipelineConfig& c, std::string_view key) {
  return c.at(key).get<std::vector<std::string>>();
}

[[noreturn]] void fail_openssl() { fail(ErrorCode::Internal, "SHA-256 digest failed"); }

struct DigestCtx {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  DigestCtx() {
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) fail_openssl();
  }
  ~DigestCtx() { EVP_MD_CTX_free(ctx); }
  void update(const void* data, std::size_t n) {
    if (EVP_DigestUpdate(ctx, data, n) != 1) fail_openssl();
  }
  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx, md, &len) != 1) fail_openssl();
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
      out += kHex[md[i] >> 4];
      out += kHex[md[i] & 15];
    }
    return out;
  }
};

std::string sha256_text(const std::string& s) {
  DigestCtx d;
  d.update(s.data(), s.size());
  return d.hex();
}

std::vector<std::string> list_files(const fs::path& root, const fs::path& dir) {
  std::vector<std::string> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out.push_back(fs::relative(e.path(), root).generic_string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Coordinates per entity type, in type order.
void save_coords(const fs::path& path, const std::array<std::vector<Point2>, 4>& coords) {
  BinaryWriter w(path);
  w.magic(kCoordsMagic);
  for (const auto& list : coords) {
    w.put<std::uint64_t>(list.size());
    for (const auto& p : list) {
      w.put<double>(p.x);
      w.put<double>(p.y);
    }
  }
  w.close();
}

std::array<std::vector<Point2>, 4> load_coords(const fs::path& path) {
  BinaryReader r(path);
  r.expect_magic(kCoordsMagic);
  std::array<std::vector<Point2>, 4> out;
  for (auto& list : out) {
    const auto n = r.get<std::uint64_t>();
    list.resize(n);
    for (auto& p : list) {
      p.x = r.get<double>();
      p.y = r.get<double>();
    }
  }
  if (!r.at_end()) fail(ErrorCode::Format, path.string() + ": trailing bytes");
  return out;
}

void save_catalog(const fs::path& path, const EntityCatalog& cat) {
  json j;
  j["min_docs"] = cat.min_docs;
  j["articles"] = json::array();
  for (const auto& a : cat.articles) j["articles"].push_back(a.label);
  for (const char* key : {"authors", "labs"}) {
    const auto& list = std::string(key) == "authors" ? cat.authors : cat.labs;
    json arr = json::array();
    for (const auto& e : list) arr.push_back({{"label", e.label}, {"docs", e.doc_refs}});
    j[key] = arr;
  }
  write_text_file(path, j.dump(1) + "\n");
}

EntityCatalog load_catalog(const fs::path& path) {
  try {
    const auto j = json::parse(read_text_file(path));
    EntityCatalog cat;
    cat.min_docs = j.at("min_docs").get<std::uint32_t>();
    std::uint32_t id = 0;
    for (const auto& label : j.at("articles")) {
      cat.articles.push_back({id, EntityType::Article, label.get<std::string>(), {id}});
      ++id;
    }
    for (auto [key, type] : {std::pair{"authors", EntityType::Author}, std::pair{"labs", EntityType::Lab}}) {
      auto& list = type == EntityType::Author ? cat.authors : cat.labs;
      for (const auto& e : j.at(key)) {
        list.push_back({static_cast<std::uint32_t>(list.size()), type, e.at("label").get<std::string>(),
                        e.at("docs").get<std::vector<std::uint32_t>>()});
      }
    }
    return cat;
  } catch (const json::exception& e) {
    fail(ErrorCode::Format, path.string() + ": " + e.what());
  }
}

void save_levels(const fs::path& path, const std::vector<ClusterLevel>& levels) {
  json arr = json::array();
  for (const auto& lv : levels) {
    json j;
    j["level"] = lv.level;
    j["k"] = lv.k;
    j["centroids"] = json::array();
    for (const auto& c : lv.centroids) j["centroids"].push_back({c.x, c.y});
    j["article_assignment"] = lv.article_assignment;
    j["word_assignment"] = lv.word_assignment;
    j["names"] = json::array();
    for (const auto& n : lv.names) {
      j["names"].push_back({{"first", n.first},
                            {"second", n.second ? json(*n.second) : json(nullptr)},
                            {"coverage", n.coverage}});
    }
    j["adjacency"] = lv.adjacency;
    arr.push_back(j);
  }
  write_text_file(path, arr.dump() + "\n");
}

std::vector<ClusterLevel> load_levels(const fs::path& path) {
  try {
    std::vector<ClusterLevel> out;
    for (const auto& j : json::parse(read_text_file(path))) {
      ClusterLevel lv;
      lv.level = j.at("level").get<std::uint32_t>();
      lv.k = j.at("k").get<std::size_t>();
      for (const auto& c : j.at("centroids")) lv.centroids.push_back({c.at(0).get<double>(), c.at(1).get<double>()});
      lv.article_assignment = j.at("article_assignment").get<std::vector<std::uint32_t>>();
      lv.word_assignment = j.at("word_assignment").get<std::vector<std::uint32_t>>();
      for (const auto& n : j.at("names")) {
        ClusterName name;
        name.first = n.at("first").get<std::uint32_t>();
        if (!n.at("second").is_null()) name.second = n.at("second").get<std::uint32_t>();
        name.coverage = n.at("coverage").get<double>();
        lv.names.push_back(name);
      }
      lv.adjacency = j.at("adjacency").get<std::vector<std::vector<std::uint32_t>>>();
      out.push_back(std::move(lv));
    }
    return out;
  } catch (const json::exception& e) {
    fail(ErrorCode::Format, path.string() + ": " + e.what());
  }
}

}  // namespace

std::string_view stage_name(Stage s) { return kStageNames[static_cast<std::size_t>(s)]; }

std::optional<Stage> parse_stage(std::string_view name) {
  for (Stage s : kStages) {
    if (stage_name(s) == name) return s;
  }
  return std::nullopt;
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  DigestCtx d;
  d.update(bytes.data(), bytes.size());
  return d.hex();
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::NotFound, "cannot read " + path.string());
  DigestCtx d;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    d.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return d.hex();
}

LogSink stderr_log() {
  return [](const std::string& msg) { std::cerr << "cartomap: " << msg << "\n"; };
}

// ---------------------------------------------------------------- config

const json& PipelineConfig::defaults() {
  static const json d = conform(build_defaults(), build_defaults(), "");
  return d;
}

PipelineConfig::PipelineConfig() : tree_(defaults()) {}

PipelineConfig PipelineConfig::from_file(const fs::path& path) {
  if (!fs::exists(path)) fail(ErrorCode::NotFound, "config file '" + path.string() + "' does not exist");
  json patch;
  try {
    patch = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    fail(ErrorCode::InvalidArgument, "config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  PipelineConfig c;
  c.merge(patch);
  return c;
}

void PipelineConfig::merge(const json& patch) {
  conform(defaults(), patch, "");  // rejects unknown keys and wrong types
  std::function<void(json&, const json&)> apply = [&](json& dst, const json& src) {
    for (const auto& [k, v] : src.items()) {
      if (v.is_object()) {
        apply(dst[k], v);
      } else {
        dst[k] = v;
      }
    }
  };
  apply(tree_, patch);
  tree_ = conform(defaults(), tree_, "");
}

void PipelineConfig::set(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    fail(ErrorCode::InvalidArgument, "override '" + std::string(assignment) + "' must look like key=value");
  }
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void PipelineConfig::set(std::string_view dotted_key, std::string_view value) {
  const std::string key(dotted_key);
  const json* def = find_key(defaults(), key);
  if (!def) fail(ErrorCode::InvalidArgument, "unknown config key '" + key + "'");
  if (def->is_object()) fail(ErrorCode::InvalidArgument, "config key '" + key + "' is a section, not a value");
  json parsed;
  if (def->is_string()) {
    parsed = std::string(value);
  } else {
    try {
      parsed = json::parse(value);
    } catch (const json::parse_error&) {
      fail(ErrorCode::InvalidArgument, "config key '" + key + "' cannot take value '" + std::string(value) + "'");
    }
  }
  json* node = &tree_;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    node = &(*node)[key.substr(start, dot == std::string::npos ? std::string::npos : dot - start)];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = conform(*def, parsed, key);
}

const json& PipelineConfig::at(std::string_view dotted_key) const {
  const json* node = find_key(tree_, dotted_key);
  if (!node) fail(ErrorCode::InvalidArgument, "unknown config key '" + std::string(dotted_key) + "'");
  return *node;
}

fs::path PipelineConfig::output() const { return get_str(*this, "output"); }
fs::path PipelineConfig::input() const { return get_str(*this, "input.path"); }

ColumnMapping PipelineConfig::columns() const {
  const auto& c = at("input.columns");
  ColumnMapping m;
  m.doc_id = c["doc_id"];
  m.title = c["title"];
  m.abstract = c["abstract"];
  m.keywords = c["keywords"];
  m.year = c["year"];
  m.domain = c["domain"];
  m.authors = c["authors"];
  m.labs = c["labs"];
  m.views = c["views"];
  return m;
}

// -------------------------------------------------------------- pipeline

struct Pipeline::Context {
  fs::path out;
  fs::path dir;
  std::vector<std::pair<std::string, double>> timings;

  template <typename F>
  auto timed(const std::string& name, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    struct Record {
      Context* ctx;
      std::string name;
      std::chrono::steady_clock::time_point t0;
      ~Record() {
        ctx->timings.emplace_back(name, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      }
    } rec{this, name, t0};
    return f();
  }
};

Pipeline::Pipeline(PipelineConfig config, LogSink log) : config_(std::move(config)), log_(std::move(log)) {
  if (!log_) log_ = [](const std::string&) {};
}

fs::path Pipeline::stage_dir(Stage s) const {
  return config_.output() / std::string(kStageDirs[static_cast<std::size_t>(s)]);
}

fs::path Pipeline::manifest_path(Stage s) const {
  return config_.output() / "manifests" / (std::string(stage_name(s)) + ".json");
}

std::vector<fs::path> Pipeline::stage_inputs(Stage s) const {
  std::vector<std::string> rel;
  switch (s) {
    case Stage::Ingest: break;
    case Stage::Vectorize: rel = {"ingest/corpus.csv"}; break;
    case Stage::Embed: rel = {"vectorize/tfidf.bin", "ingest/catalog.json"}; break;
    case Stage::Knn:
    case Stage::Project: rel.assign(kEmbeddingFiles.begin(), kEmbeddingFiles.end()); break;
    case Stage::Cluster: rel = {"project/coords.bin", "vectorize/tfidf.bin", "vectorize/vocab.tsv"}; break;
    case Stage::Export:
      rel = {"ingest/corpus.csv",   "ingest/catalog.json", "vectorize/tfidf.bin", "vectorize/vocab.tsv",
             "knn/neighbors.bin",   "project/coords.bin",  "cluster/levels.json"};
      break;
    case Stage::Raster:
    case Stage::Index: rel = kSnapshotFiles; break;
  }
  return {rel.begin(), rel.end()};
}

json Pipeline::stage_params(Stage s) const {
  const auto& t = config_.tree();
  switch (s) {
    case Stage::Ingest: return {{"columns", t["input"]["columns"]}, {"ingest", t["ingest"]}};
    case Stage::Vectorize: return t["vectorize"];
    case Stage::Embed: return {{"embed", t["embed"]}, {"seed", t["seed"]}};
    case Stage::Knn: return {{"knn", t["knn"]}, {"seed", t["seed"]}};
    case Stage::Project: return {{"project", t["project"]}, {"knn", t["knn"]}, {"seed", t["seed"]}};
    case Stage::Cluster: return {{"cluster", t["cluster"]}, {"seed", t["seed"]}};
    case Stage::Export: return json::object();
    case Stage::Raster: return t["raster"];
    case Stage::Index: return {{"index", t["index"]}, {"zmax", t["raster"]["zmax"]}};
  }
  return json::object();
}

StageReport Pipeline::run(Stage s, bool force) {
  const auto out = config_.output();
  const std::string name(stage_name(s));

  json inputs = json::object();
  if (s == Stage::Ingest) {
    const auto in = config_.input();
    if (in.empty()) fail(ErrorCode::InvalidArgument, "input.path is not set; pass --input or set it in the config");
    if (!fs::is_regular_file(in)) fail(ErrorCode::NotFound, "input corpus '" + in.string() + "' does not exist");
    inputs[in.generic_string()] = sha256_file(in);
  }
  for (const auto& rel : stage_inputs(s)) {
    if (!fs::is_regular_file(out / rel)) {
      const auto producer = parse_stage(rel.begin()->string()).value_or(Stage::Export);
      const auto& pname = rel.begin()->string() == "snapshot" ? std::string("export") : std::string(stage_name(producer));
      fail(ErrorCode::MissingStage, "stage '" + name + "' needs " + rel.generic_string() + " from stage '" + pname +
                                        "'; run '" + pname + "' first");
    }
    inputs[rel.generic_string()] = sha256_file(out / rel);
  }
  const json key = {{"stage", name}, {"params", stage_params(s)}, {"inputs", inputs}};
  const auto input_hash = sha256_text(key.dump());

  StageReport report;
  report.stage = s;
  report.input_hash = input_hash;

  const auto mpath = manifest_path(s);
  if (!force && fs::exists(mpath)) {
    json m;
    try {
      m = json::parse(read_text_file(mpath));
    } catch (const json::parse_error&) {
      m = json::object();
    }
    bool intact = m.value("input_hash", "") == input_hash && m.contains("outputs");
    if (intact) {
      for (const auto& [rel, hash] : m["outputs"].items()) {
        if (!fs::is_regular_file(out / rel) || sha256_file(out / rel) != hash.get<std::string>()) {
          intact = false;
          break;
        }
      }
    }
    if (intact) {
      m["status"] = "skipped";
      m["skips"] = m.value("skips", 0) + 1;
      write_text_file(mpath, m.dump(2) + "\n");
      log_(name + ": inputs unchanged, skipped");
      return report;
    }
  }

  Context ctx;
  ctx.out = out;
  ctx.dir = stage_dir(s);
  fs::remove_all(ctx.dir);
  fs::create_directories(ctx.dir);
  fs::create_directories(mpath.parent_path());
  log_(name + ": running");
  const auto t0 = std::chrono::steady_clock::now();
  execute(s, ctx);
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report.executed = true;
  report.timings = ctx.timings;

  json outputs = json::object();
  for (const auto& rel : list_files(out, ctx.dir)) outputs[rel] = sha256_file(out / rel);
  json timings = json::object();
  for (const auto& [k, v] : ctx.timings) timings[k] = v;
  json manifest = {{"format", kManifestFormat}, {"stage", name},      {"status", "executed"},
                   {"input_hash", input_hash},  {"params", key["params"]}, {"inputs", inputs},
                   {"outputs", outputs},        {"seconds", report.seconds}, {"timings", timings}};
  write_text_file(mpath, manifest.dump(2) + "\n");
  log_(name + ": done in " + std::to_string(report.seconds) + " s");
  return report;
}

std::vector<StageReport> Pipeline::run_all(bool force) {
  std::vector<StageReport> out;
  for (Stage s : kStages) out.push_back(run(s, force));
  return out;
}

void Pipeline::execute(Stage s, Context& ctx) {
  switch (s) {
    case Stage::Ingest: return do_ingest(ctx);
    case Stage::Vectorize: return do_vectorize(ctx);
    case Stage::Embed: return do_embed(ctx);
    case Stage::Knn: return do_knn(ctx);
    case Stage::Project: return do_project(ctx);
    case Stage::Cluster: return do_cluster(ctx);
    case Stage::Export: return do_export(ctx);
    case Stage::Raster: return do_raster(ctx);
    case Stage::Index: return do_index(ctx);
  }
}

void Pipeline::do_ingest(Context& ctx) {
  const auto records = ctx.timed("load", [&] {
    return load_corpus(config_.input(), config_.columns(), [&](const std::string& w) { log_("ingest: " + w); });
  });
  if (records.empty()) fail(ErrorCode::InvalidArgument, "input corpus has no usable records");
  const auto min_docs = static_cast<std::uint32_t>(get_u64(config_, "ingest.min_docs"));
  const auto catalog = ctx.timed("catalog", [&] { return build_catalog(records, min_docs); });
  write_corpus_csv(ctx.dir / "corpus.csv", records);
  save_catalog(ctx.dir / "catalog.json", catalog);
  log_("ingest: " + std::to_string(catalog.articles.size()) + " articles, " + std::to_string(catalog.authors.size()) +
       " authors, " + std::to_string(catalog.labs.size()) + " labs");
}

void Pipeline::do_vectorize(Context& ctx) {
  const auto records = load_corpus(ctx.out / "ingest/corpus.csv", ColumnMapping{});
  const auto n_max = get_u64(config_, "vectorize.n_max");
  const auto& stop = stopwords(get_str(config_, "vectorize.language"));
  auto [vocab, tfidf] = ctx.timed("term extraction", [&] {
    std::vector<TermCounts> docs;
    docs.reserve(records.size());
    for (const auto& r : records) docs.push_back(analyze_record(r, stop, n_max));
    auto v = build_vocab(docs, get_u64(config_, "vectorize.m_min"), get_u64(config_, "vectorize.v_cap"), n_max);
    auto m = tfidf_matrix(docs, v);
    return std::pair{std::move(v), std::move(m)};
  });
  if (vocab.size() == 0) {
    fail(ErrorCode::InvalidArgument, "no term reaches vectorize.m_min occurrences; lower it for small corpora");
  }
  tfidf.save(ctx.dir / "tfidf.bin");
  vocab.save_tsv(ctx.dir / "vocab.tsv");
  log_("vectorize: " + std::to_string(vocab.size()) + " terms");
}

void Pipeline::do_embed(Context& ctx) {
  const auto tfidf = SparseMatrix::load(ctx.out / "vectorize/tfidf.bin");
  const auto catalog = load_catalog(ctx.out / "ingest/catalog.json");
  const auto d_req = get_u64(config_, "embed.d");
  const auto d = std::min<std::size_t>({d_req, tfidf.n_rows(), tfidf.n_cols()});
  if (d != d_req) log_("embed: d clamped from " + std::to_string(d_req) + " to " + std::to_string(d));
  require(d >= 1, "embed: corpus too small for a latent space");
  LsaParams lsa;
  lsa.oversampling = get_u64(config_, "embed.oversampling");
  lsa.power_iterations = get_u64(config_, "embed.power_iterations");
  const auto model = ctx.timed("LSA", [&] { return fit_lsa(tfidf, d, get_u64(config_, "seed"), lsa); });
  model.save(ctx.dir / "model.bin");
  ctx.timed("embed entities", [&] {
    const auto articles = embed_articles(model, tfidf);
    articles.save(ctx.out / kEmbeddingFiles[0]);
    embed_terms(model).save(ctx.out / kEmbeddingFiles[1]);
    embed_aggregates(incidence_matrix(catalog, EntityType::Author), articles, EntityType::Author)
        .save(ctx.out / kEmbeddingFiles[2]);
    embed_aggregates(incidence_matrix(catalog, EntityType::Lab), articles, EntityType::Lab)
        .save(ctx.out / kEmbeddingFiles[3]);
    return 0;
  });
}

void Pipeline::do_knn(Context& ctx) {
  std::vector<LatentEmbedding> emb;
  for (const auto& f : kEmbeddingFiles) emb.push_back(LatentEmbedding::load(ctx.out / f));
  const auto k = static_cast<std::uint32_t>(get_u64(config_, "knn.k"));
  require(k >= 1, "knn.k must be >= 1");
  const auto exact_below = get_u64(config_, "knn.exact_below");
  AnnParams ann;
  ann.M = get_u64(config_, "knn.M");
  ann.ef_construction = get_u64(config_, "knn.ef_construction");
  ann.ef = get_u64(config_, "knn.ef");
  ann.seed = get_u64(config_, "seed");
  std::vector<NeighborLists> all;
  ctx.timed("nearest neighbors", [&] {
    for (const auto& target : emb) {
      if (target.n == 0) continue;
      std::unique_ptr<AnnIndex> index;
      if (target.n >= exact_below) index = std::make_unique<AnnIndex>(target, ann);
      for (const auto& query : emb) {
        if (query.n == 0) continue;
        const auto avail = target.n - (query.type == target.type ? 1 : 0);
        const auto kk = static_cast<std::uint32_t>(std::min<std::size_t>(k, avail));
        if (kk == 0) continue;
        all.push_back(index ? knn_approx(*index, query, kk, ann.ef) : knn_exact(query, target, kk));
      }
    }
    return 0;
  });
  save_neighbor_lists(ctx.dir / "neighbors.bin", all);
}

void Pipeline::do_project(Context& ctx) {
  std::vector<LatentEmbedding> emb;
  for (const auto& f : kEmbeddingFiles) emb.push_back(LatentEmbedding::load(ctx.out / f));
  ProjectionParams p;
  p.layout.epochs = get_u64(config_, "project.epochs");
  p.layout.min_dist = get_f64(config_, "project.min_dist");
  p.layout.seed = get_u64(config_, "seed");
  p.n_neighbors = get_u64(config_, "project.n_neighbors");
  p.subset_fraction = get_f64(config_, "project.subset_fraction");
  p.max_fit = get_u64(config_, "project.max_fit");
  p.exact_knn_below = get_u64(config_, "knn.exact_below");
  p.ann.M = get_u64(config_, "knn.M");
  p.ann.ef_construction = get_u64(config_, "knn.ef_construction");
  p.ann.ef = get_u64(config_, "knn.ef");
  p.ann.seed = p.layout.seed;
  require(p.subset_fraction > 0.0 && p.subset_fraction <= 1.0, "project.subset_fraction must be in (0, 1]");

  std::array<std::vector<Point2>, 4> raw;
  ctx.timed("projection", [&] {
    ProjectionModel model;
    raw[0] = project_latent(emb[0], p, &model).coords;
    for (std::size_t t = 1; t < 4; ++t) raw[t] = place_points(emb[t], model, p);
    return 0;
  });
  // One normalization for all types keeps them in a shared frame.
  std::vector<Point2> joint;
  for (const auto& list : raw) joint.insert(joint.end(), list.begin(), list.end());
  joint = normalize_coords(joint);
  std::array<std::vector<Point2>, 4> coords;
  std::size_t at = 0;
  for (std::size_t t = 0; t < 4; ++t) {
    coords[t].assign(joint.begin() + static_cast<std::ptrdiff_t>(at),
                     joint.begin() + static_cast<std::ptrdiff_t>(at + raw[t].size()));
    at += raw[t].size();
  }
  save_coords(ctx.dir / "coords.bin", coords);
}

void Pipeline::do_cluster(Context& ctx) {
  const auto coords = load_coords(ctx.out / "project/coords.bin");
  const auto doc_terms = doc_term_sets(SparseMatrix::load(ctx.out / "vectorize/tfidf.bin"));
  const auto vocab = Vocabulary::load_tsv(ctx.out / "vectorize/vocab.tsv");
  std::vector<std::size_t> ks;
  for (const auto& k : config_.at("cluster.ks")) {
    const auto v = k.get<std::size_t>();
    if (v == 0 || v > coords[0].size()) {
      log_("cluster: dropping level with k=" + std::to_string(v) + " for " + std::to_string(coords[0].size()) +
           " articles");
      continue;
    }
    ks.push_back(v);
  }
  const auto levels = ctx.timed("clustering", [&] {
    return build_levels(coords[0], coords[1], doc_terms, vocab.terms, ks, get_u64(config_, "seed"));
  });
  save_levels(ctx.dir / "levels.json", levels);
}

void Pipeline::do_export(Context& ctx) {
  const auto records = load_corpus(ctx.out / "ingest/corpus.csv", ColumnMapping{});
  const auto catalog = load_catalog(ctx.out / "ingest/catalog.json");
  const auto vocab = Vocabulary::load_tsv(ctx.out / "vectorize/vocab.tsv");
  const auto doc_terms = doc_term_sets(SparseMatrix::load(ctx.out / "vectorize/tfidf.bin"));
  const auto coords = load_coords(ctx.out / "project/coords.bin");
  const auto levels = load_levels(ctx.out / "cluster/levels.json");
  if (records.size() != catalog.articles.size() || coords[0].size() != records.size() ||
      coords[1].size() != vocab.size() || coords[2].size() != catalog.authors.size() ||
      coords[3].size() != catalog.labs.size()) {
    fail(ErrorCode::Format, "export: upstream artifacts disagree on entity counts; rerun the pipeline");
  }

  ctx.timed("assemble", [&] {
    std::vector<std::optional<double>> views;
    for (const auto& r : records) views.push_back(r.views_per_year);
    const auto scores = score_entities(catalog, vocab.df, views);

    MapSnapshot s;
    auto& arts = s.of(EntityType::Article);
    for (std::size_t i = 0; i < records.size(); ++i) {
      SnapshotEntity e;
      e.label = catalog.articles[i].label;
      e.score = scores.articles[i];
      e.pos = coords[0][i];
      e.meta["doc_id"] = records[i].doc_id;
      if (records[i].pub_year) e.meta["year"] = std::to_string(*records[i].pub_year);
      if (records[i].domain_tag) e.meta["domain"] = *records[i].domain_tag;
      e.terms = doc_terms[i];
      arts.push_back(std::move(e));
    }
    for (std::size_t w = 0; w < vocab.size(); ++w) {
      s.of(EntityType::Word).push_back({vocab.terms[w], scores.words[w], coords[1][w], {}, {}});
    }
    for (std::size_t a = 0; a < catalog.authors.size(); ++a) {
      s.of(EntityType::Author).push_back({catalog.authors[a].label, scores.authors[a], coords[2][a], {}, {}});
    }
    std::map<std::string, std::uint32_t> author_id;
    for (const auto& a : catalog.authors) author_id[a.label] = a.id;
    for (std::size_t l = 0; l < catalog.labs.size(); ++l) {
      s.of(EntityType::Lab).push_back({catalog.labs[l].label, scores.labs[l], coords[3][l], {}, {}});
      LabRelations rel;
      rel.articles = catalog.labs[l].doc_refs;
      std::set<std::uint32_t> authors;
      for (auto doc : rel.articles) {
        for (const auto& name : records[doc].authors) {
          if (auto it = author_id.find(trim(name)); it != author_id.end()) authors.insert(it->second);
        }
      }
      rel.authors.assign(authors.begin(), authors.end());
      s.lab_relations.push_back(std::move(rel));
    }
    s.neighbors = load_neighbor_lists(ctx.out / "knn/neighbors.bin");
    for (const auto& lv : levels) {
      SnapshotLevel out;
      out.level = lv.level;
      out.article_assignment = lv.article_assignment;
      for (std::size_t c = 0; c < lv.centroids.size(); ++c) {
        out.clusters.push_back({lv.centroids[c], lv.label(c, vocab.terms), lv.names[c].coverage, lv.adjacency[c]});
      }
      s.levels.push_back(std::move(out));
    }
    export_map(s, ctx.dir);
    return 0;
  });
}

void Pipeline::do_raster(Context& ctx) {
  const auto s = load_map(ctx.out / "snapshot");
  const auto zmax = static_cast<std::uint32_t>(get_u64(config_, "raster.zmax"));
  const auto sigma = get_f64(config_, "raster.sigma");
  for (const auto& layer : get_strs(config_, "raster.layers")) {
    const auto type = parse_entity_type(layer);
    if (!type || layer != layer_name(*type)) {
      fail(ErrorCode::InvalidArgument, "raster.layers: '" + layer + "' is not a layer (use articles, words, authors or labs)");
    }
    std::vector<Point2> pts;
    for (const auto& e : s.of(*type)) pts.push_back(e.pos);
    ctx.timed("raster " + layer, [&] { return write_pyramid(pts, layer, zmax, sigma, ctx.dir); });
  }
}

void Pipeline::do_index(Context& ctx) {
  const auto s = load_map(ctx.out / "snapshot");
  std::vector<std::string> facets;
  for (const auto& f : get_strs(config_, "index.facets")) {
    if (f == "type" || f == "lab" || f == "term") {
      facets.push_back(f);
      continue;
    }
    bool present = false;
    for (const auto& list : s.entities) {
      for (const auto& e : list) present = present || e.meta.count(f) > 0;
    }
    if (present) {
      facets.push_back(f);
    } else {
      log_("index: no entity carries '" + f + "'; facet skipped");
    }
  }
  ctx.timed("facets", [&] {
    build_facet_index(s, facets).save(ctx.dir);
    return 0;
  });
  ctx.timed("tile index", [&] {
    build_tile_index(s, static_cast<std::uint32_t>(get_u64(config_, "raster.zmax"))).save(ctx.dir);
    return 0;
  });
}

SyntheticCorpus write_synth_corpus(const PipelineConfig& config, const fs::path& csv) {
  auto corpus = synth_corpus(static_cast<std::uint32_t>(get_u64(config, "synth.topics")),
                             static_cast<std::uint32_t>(get_u64(config, "synth.docs_per_topic")),
                             static_cast<std::uint32_t>(get_u64(config, "synth.topic_vocab")),
                             static_cast<std::uint32_t>(get_u64(config, "synth.shared_vocab")),
                             get_u64(config, "synth.seed"));
  if (csv.has_parent_path()) fs::create_directories(csv.parent_path());
  write_corpus_csv(csv, corpus.records);
  std::string truth = "doc_id\ttopic\n";
  for (std::size_t i = 0; i < corpus.records.size(); ++i) {
    truth += corpus.records[i].doc_id + "\t" + std::to_string(corpus.topic_of[i]) + "\n";
  }
  write_text_file(fs::path(csv.string() + ".topics.tsv"), truth);
  return corpus;
}

}  // namespace cartomap
