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

#include "snapshot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "json.hpp"

namespace cartomap {

namespace {

using ojson = nlohmann::ordered_json;

constexpr std::string_view kGeometryMagic = "CMGEOM01";

std::string describe(EntityType t, std::uint32_t local) {
  return std::string(type_name(t)) + " " + std::to_string(local);
}

[[noreturn]] void invalid(const std::string& what) { fail(ErrorCode::Format, "invalid snapshot: " + what); }

bool in_unit(double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; }

std::size_t type_count(const MapSnapshot& s, EntityType t) { return s.of(t).size(); }

}  // namespace

std::size_t MapSnapshot::total() const {
  std::size_t n = 0;
  for (const auto& v : entities) n += v.size();
  return n;
}

std::uint32_t MapSnapshot::global_id(EntityType t, std::uint32_t local) const {
  std::size_t offset = 0;
  for (std::size_t i = 0; i < static_cast<std::size_t>(t); ++i) offset += entities[i].size();
  return static_cast<std::uint32_t>(offset + local);
}

std::pair<EntityType, std::uint32_t> MapSnapshot::locate(std::uint32_t global) const {
  std::size_t g = global;
  for (EntityType t : kAllEntityTypes) {
    const auto n = of(t).size();
    if (g < n) return {t, static_cast<std::uint32_t>(g)};
    g -= n;
  }
  fail(ErrorCode::NotFound, "unknown entity id " + std::to_string(global));
}

const SnapshotEntity& MapSnapshot::entity(std::uint32_t global) const {
  const auto [t, local] = locate(global);
  return of(t)[local];
}

const NeighborLists* MapSnapshot::find_neighbors(EntityType query, EntityType target) const {
  for (const auto& nl : neighbors) {
    if (nl.query_type == query && nl.target_type == target) return &nl;
  }
  return nullptr;
}

void MapSnapshot::validate() const {
  if (format_version != kSnapshotVersion) {
    fail(ErrorCode::Format, "unsupported snapshot format_version '" + format_version + "'");
  }
  if (total() == 0) fail(ErrorCode::Format, "empty snapshot");
  if (total() > std::numeric_limits<std::uint32_t>::max()) invalid("too many entities");

  const auto n_words = of(EntityType::Word).size();
  for (EntityType t : kAllEntityTypes) {
    const auto& list = of(t);
    for (std::uint32_t i = 0; i < list.size(); ++i) {
      const auto& e = list[i];
      if (!in_unit(e.pos.x) || !in_unit(e.pos.y)) invalid(describe(t, i) + " has coordinates outside [0,1]");
      if (!std::isfinite(e.score) || e.score < 0.0) invalid(describe(t, i) + " has a negative or non-finite score");
      if (!e.terms.empty() && t != EntityType::Article) invalid(describe(t, i) + " carries a term list");
      for (std::size_t j = 0; j < e.terms.size(); ++j) {
        if (e.terms[j] >= n_words) {
          invalid(describe(t, i) + " references unknown word id " + std::to_string(e.terms[j]));
        }
        if (j > 0 && e.terms[j] <= e.terms[j - 1]) invalid(describe(t, i) + " has an unsorted term list");
      }
    }
  }

  for (std::size_t a = 0; a < neighbors.size(); ++a) {
    const auto& nl = neighbors[a];
    for (std::size_t b = 0; b < a; ++b) {
      if (neighbors[b].query_type == nl.query_type && neighbors[b].target_type == nl.target_type) {
        invalid("duplicate neighbor block " + std::string(type_name(nl.query_type)) + "->" +
                std::string(type_name(nl.target_type)));
      }
    }
    const auto nq = type_count(*this, nl.query_type);
    const auto nt = type_count(*this, nl.target_type);
    if (nl.lists.size() != nq) {
      invalid("neighbor block " + std::string(type_name(nl.query_type)) + "->" +
              std::string(type_name(nl.target_type)) + " has " + std::to_string(nl.lists.size()) +
              " lists for " + std::to_string(nq) + " entities");
    }
    for (std::uint32_t q = 0; q < nl.lists.size(); ++q) {
      const auto& list = nl.lists[q];
      if (list.size() > nl.k) invalid(describe(nl.query_type, q) + " has more than k neighbors");
      for (std::size_t j = 0; j < list.size(); ++j) {
        if (list[j].id >= nt) {
          invalid("neighbor id " + std::to_string(list[j].id) + " of " + describe(nl.query_type, q) +
                  " does not resolve to a " + std::string(type_name(nl.target_type)));
        }
        if (!std::isfinite(list[j].distance) || list[j].distance < 0.0f) {
          invalid(describe(nl.query_type, q) + " has an invalid neighbor distance");
        }
        if (j > 0 && neighbor_less(list[j], list[j - 1])) {
          invalid(describe(nl.query_type, q) + " has unsorted neighbors");
        }
      }
    }
  }

  const auto n_articles = of(EntityType::Article).size();
  const auto n_authors = of(EntityType::Author).size();
  if (lab_relations.size() != of(EntityType::Lab).size()) {
    invalid("related sets cover " + std::to_string(lab_relations.size()) + " labs but the snapshot has " +
            std::to_string(of(EntityType::Lab).size()));
  }
  for (std::uint32_t l = 0; l < lab_relations.size(); ++l) {
    auto check = [&](const std::vector<std::uint32_t>& ids, std::size_t bound, EntityType t) {
      for (std::size_t j = 0; j < ids.size(); ++j) {
        if (ids[j] >= bound) {
          invalid(describe(EntityType::Lab, l) + " relates to unknown " + std::string(type_name(t)) + " " +
                  std::to_string(ids[j]));
        }
        if (j > 0 && ids[j] <= ids[j - 1]) invalid(describe(EntityType::Lab, l) + " has an unsorted related set");
      }
    };
    check(lab_relations[l].articles, n_articles, EntityType::Article);
    check(lab_relations[l].authors, n_authors, EntityType::Author);
  }

  for (const auto& lv : levels) {
    const auto k = lv.clusters.size();
    const std::string where = "cluster level " + std::to_string(lv.level);
    if (k == 0) invalid(where + " has no clusters");
    if (lv.article_assignment.size() != n_articles) invalid(where + " assignment does not cover every article");
    for (std::uint32_t i = 0; i < n_articles; ++i) {
      if (lv.article_assignment[i] >= k) invalid(where + " assigns article " + std::to_string(i) + " to a missing cluster");
    }
    for (std::size_t c = 0; c < k; ++c) {
      const auto& cl = lv.clusters[c];
      if (!std::isfinite(cl.centroid.x) || !std::isfinite(cl.centroid.y)) invalid(where + " has a non-finite centroid");
      for (auto a : cl.adjacent) {
        if (a >= k) invalid(where + " cluster " + std::to_string(c) + " is adjacent to a missing cluster");
      }
    }
  }
}

EntityScores score_entities(const EntityCatalog& catalog, std::span<const std::uint32_t> word_df,
                            std::span<const std::optional<double>> views) {
  require(views.empty() || views.size() == catalog.articles.size(),
          "views must have one entry per article or be empty");
  EntityScores s;
  s.articles.assign(catalog.articles.size(), 1.0);
  for (std::size_t i = 0; i < views.size(); ++i) {
    if (!views[i]) continue;
    const double v = *views[i];
    if (!std::isfinite(v) || v < 0.0) {
      fail(ErrorCode::InvalidArgument,
           "article " + std::to_string(i) + " has invalid views value " + std::to_string(v));
    }
    s.articles[i] = v;
  }
  s.words.assign(word_df.begin(), word_df.end());
  for (const auto& a : catalog.authors) s.authors.push_back(static_cast<double>(a.doc_refs.size()));
  for (const auto& l : catalog.labs) s.labs.push_back(static_cast<double>(l.doc_refs.size()));
  return s;
}

void export_map(const MapSnapshot& snapshot, const std::filesystem::path& dir) {
  snapshot.validate();
  std::filesystem::create_directories(dir);

  double min_x = 1.0, min_y = 1.0, max_x = 0.0, max_y = 0.0;
  for (const auto& list : snapshot.entities) {
    for (const auto& e : list) {
      min_x = std::min(min_x, e.pos.x);
      min_y = std::min(min_y, e.pos.y);
      max_x = std::max(max_x, e.pos.x);
      max_y = std::max(max_y, e.pos.y);
    }
  }

  ojson manifest;
  manifest["format_version"] = snapshot.format_version;
  ojson counts = ojson::object();
  for (EntityType t : kAllEntityTypes) counts[layer_name(t)] = snapshot.of(t).size();
  manifest["counts"] = counts;
  manifest["bounds"] = {{"min_x", min_x}, {"min_y", min_y}, {"max_x", max_x}, {"max_y", max_y}};
  manifest["cluster_levels"] = snapshot.levels.size();
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");

  {
    std::ofstream out(dir / "entities.jsonl", std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::NotFound, "cannot write " + (dir / "entities.jsonl").string());
    std::uint32_t gid = 0;
    for (EntityType t : kAllEntityTypes) {
      const auto& list = snapshot.of(t);
      for (std::uint32_t i = 0; i < list.size(); ++i, ++gid) {
        const auto& e = list[i];
        ojson rec;
        rec["id"] = gid;
        rec["type"] = type_name(t);
        rec["local_id"] = i;
        rec["label"] = e.label;
        rec["score"] = e.score;
        rec["meta"] = e.meta;
        if (t == EntityType::Article) rec["terms"] = e.terms;
        if (t == EntityType::Lab) {
          rec["related"] = {{"articles", snapshot.lab_relations[i].articles},
                            {"authors", snapshot.lab_relations[i].authors}};
        }
        out << rec.dump() << '\n';
      }
    }
    if (!out) fail(ErrorCode::Internal, "write failed for entities.jsonl");
  }

  {
    BinaryWriter w(dir / "geometry.bin");
    w.magic(kGeometryMagic);
    for (EntityType t : kAllEntityTypes) {
      const auto& list = snapshot.of(t);
      w.put<std::uint64_t>(list.size());
      for (const auto& e : list) {
        w.put<double>(e.pos.x);
        w.put<double>(e.pos.y);
      }
    }
    w.close();
  }

  save_neighbor_lists(dir / "neighbors.bin", snapshot.neighbors);

  ojson clusters = ojson::array();
  for (const auto& lv : snapshot.levels) {
    ojson level;
    level["level"] = lv.level;
    level["k"] = lv.clusters.size();
    ojson cs = ojson::array();
    for (const auto& c : lv.clusters) {
      cs.push_back({{"x", c.centroid.x},
                    {"y", c.centroid.y},
                    {"label", c.label},
                    {"coverage", c.coverage},
                    {"adjacent", c.adjacent}});
    }
    level["clusters"] = std::move(cs);
    level["article_assignment"] = lv.article_assignment;
    clusters.push_back(std::move(level));
  }
  write_text_file(dir / "clusters.json", clusters.dump() + "\n");
}

namespace {

template <typename T>
T field(const ojson& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) invalid(where + " lacks field '" + key + "'");
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    invalid(where + " has a malformed '" + key + "' field");
  }
}

ojson parse_json(const std::string& text, const std::string& where) {
  try {
    return ojson::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::Format, "cannot parse " + where + ": " + e.what());
  }
}

}  // namespace

MapSnapshot load_map(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) fail(ErrorCode::NotFound, "no snapshot directory at " + dir.string());
  MapSnapshot s;

  const auto manifest = parse_json(read_text_file(dir / "manifest.json"), "manifest.json");
  s.format_version = field<std::string>(manifest, "format_version", "manifest");
  if (s.format_version != kSnapshotVersion) {
    fail(ErrorCode::Format, "unsupported snapshot format_version '" + s.format_version + "' (expected '" +
                                std::string(kSnapshotVersion) + "')");
  }
  const auto counts = field<ojson>(manifest, "counts", "manifest");
  std::array<std::size_t, 4> expected{};
  std::size_t expected_total = 0;
  for (EntityType t : kAllEntityTypes) {
    expected[static_cast<std::size_t>(t)] = field<std::size_t>(counts, layer_name(t).c_str(), "manifest counts");
    expected_total += expected[static_cast<std::size_t>(t)];
  }
  if (expected_total == 0) fail(ErrorCode::Format, "empty snapshot");
  for (EntityType t : kAllEntityTypes) s.of(t).reserve(expected[static_cast<std::size_t>(t)]);
  s.lab_relations.reserve(expected[static_cast<std::size_t>(EntityType::Lab)]);

  {
    std::ifstream in(dir / "entities.jsonl", std::ios::binary);
    if (!in) fail(ErrorCode::NotFound, "missing " + (dir / "entities.jsonl").string());
    std::string line;
    std::uint32_t gid = 0;
    std::size_t type_index = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const std::string where = "entity record " + std::to_string(gid);
      const auto rec = parse_json(line, where);
      while (type_index < 4 && s.entities[type_index].size() == expected[type_index]) ++type_index;
      if (type_index == 4) invalid("entities.jsonl has more rows than the manifest counts");
      const auto t = static_cast<EntityType>(type_index);
      const auto local = static_cast<std::uint32_t>(s.entities[type_index].size());

      if (field<std::uint32_t>(rec, "id", where) != gid) invalid(where + " is out of order");
      const auto tname = field<std::string>(rec, "type", where);
      if (tname != type_name(t)) invalid(where + " has type '" + tname + "', expected " + std::string(type_name(t)));
      if (field<std::uint32_t>(rec, "local_id", where) != local) invalid(where + " has a non-dense local_id");

      SnapshotEntity e;
      e.label = field<std::string>(rec, "label", where);
      e.score = field<double>(rec, "score", where);
      e.meta = field<std::map<std::string, std::string>>(rec, "meta", where);
      if (t == EntityType::Article) e.terms = field<std::vector<std::uint32_t>>(rec, "terms", where);
      if (t == EntityType::Lab) {
        const auto rel = field<ojson>(rec, "related", where);
        LabRelations r;
        r.articles = field<std::vector<std::uint32_t>>(rel, "articles", where);
        r.authors = field<std::vector<std::uint32_t>>(rel, "authors", where);
        s.lab_relations.push_back(std::move(r));
      }
      s.entities[type_index].push_back(std::move(e));
      ++gid;
    }
    if (gid != expected_total) {
      invalid("entities.jsonl has " + std::to_string(gid) + " rows, manifest declares " +
              std::to_string(expected_total));
    }
  }

  {
    BinaryReader r(dir / "geometry.bin");
    r.expect_magic(kGeometryMagic);
    for (EntityType t : kAllEntityTypes) {
      auto& list = s.of(t);
      const auto n = r.get<std::uint64_t>();
      if (n != list.size()) invalid("geometry.bin count mismatch for " + layer_name(t));
      for (auto& e : list) {
        e.pos.x = r.get<double>();
        e.pos.y = r.get<double>();
      }
    }
    if (!r.at_end()) invalid("trailing bytes in geometry.bin");
  }

  s.neighbors = load_neighbor_lists(dir / "neighbors.bin");

  const auto clusters = parse_json(read_text_file(dir / "clusters.json"), "clusters.json");
  if (!clusters.is_array()) invalid("clusters.json must be an array");
  for (const auto& lvj : clusters) {
    SnapshotLevel lv;
    lv.level = field<std::uint32_t>(lvj, "level", "cluster level");
    const std::string where = "cluster level " + std::to_string(lv.level);
    lv.article_assignment = field<std::vector<std::uint32_t>>(lvj, "article_assignment", where);
    const auto cs = field<ojson>(lvj, "clusters", where);
    if (!cs.is_array() || cs.size() != field<std::size_t>(lvj, "k", where)) invalid(where + " cluster count mismatch");
    for (const auto& cj : cs) {
      SnapshotCluster c;
      c.centroid = {field<double>(cj, "x", where), field<double>(cj, "y", where)};
      c.label = field<std::string>(cj, "label", where);
      c.coverage = field<double>(cj, "coverage", where);
      c.adjacent = field<std::vector<std::uint32_t>>(cj, "adjacent", where);
      lv.clusters.push_back(std::move(c));
    }
    s.levels.push_back(std::move(lv));
  }

  s.validate();
  return s;
}

}  // namespace cartomap
