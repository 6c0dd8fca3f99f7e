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

#ifndef CARTOMAP_SNAPSHOT_HPP
#define CARTOMAP_SNAPSHOT_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "common.hpp"
#include "corpus.hpp"
#include "neighbors.hpp"

namespace cartomap {

inline constexpr std::string_view kSnapshotVersion = "cartomap/1";

struct SnapshotEntity {
  std::string label;
  double score = 1.0;
  Point2 pos;
  std::map<std::string, std::string> meta;
  std::vector<std::uint32_t> terms;  // articles only: word ids of retained terms

  friend bool operator==(const SnapshotEntity&, const SnapshotEntity&) = default;
};

struct SnapshotCluster {
  Point2 centroid;
  std::string label;
  double coverage = 0.0;
  std::vector<std::uint32_t> adjacent;

  friend bool operator==(const SnapshotCluster&, const SnapshotCluster&) = default;
};

struct SnapshotLevel {
  std::uint32_t level = 0;
  std::vector<SnapshotCluster> clusters;
  std::vector<std::uint32_t> article_assignment;

  friend bool operator==(const SnapshotLevel&, const SnapshotLevel&) = default;
};

struct LabRelations {
  std::vector<std::uint32_t> articles;
  std::vector<std::uint32_t> authors;

  friend bool operator==(const LabRelations&, const LabRelations&) = default;
};

// The serving view of a map. Entities are stored per type; their position
// in the vector is their per-type id. Global ids enumerate articles, then
// words, authors and labs.
struct MapSnapshot {
  std::string format_version{kSnapshotVersion};
  std::array<std::vector<SnapshotEntity>, 4> entities;
  std::vector<NeighborLists> neighbors;
  std::vector<SnapshotLevel> levels;
  std::vector<LabRelations> lab_relations;  // indexed by lab id

  std::vector<SnapshotEntity>& of(EntityType t) { return entities[static_cast<std::size_t>(t)]; }
  const std::vector<SnapshotEntity>& of(EntityType t) const { return entities[static_cast<std::size_t>(t)]; }

  std::size_t total() const;
  std::uint32_t global_id(EntityType t, std::uint32_t local) const;
  // Throws NotFound for ids past the end.
  std::pair<EntityType, std::uint32_t> locate(std::uint32_t global) const;
  const SnapshotEntity& entity(std::uint32_t global) const;

  const NeighborLists* find_neighbors(EntityType query, EntityType target) const;

  // Checks every structural invariant. Messages name the offending entity.
  void validate() const;

  friend bool operator==(const MapSnapshot&, const MapSnapshot&) = default;
};

struct EntityScores {
  std::vector<double> articles;
  std::vector<double> words;
  std::vector<double> authors;
  std::vector<double> labs;
};

// views has one optional entry per article; missing values score 1.0.
EntityScores score_entities(const EntityCatalog& catalog, std::span<const std::uint32_t> word_df,
                            std::span<const std::optional<double>> views = {});

// Directory layout:
//   manifest.json   format_version, per-type counts, coordinate bounds
//   entities.jsonl  one record per entity in global id order
//   geometry.bin    "CMGEOM01", then per type u64 n and n pairs of f64 (x, y)
//   neighbors.bin   neighbor lists in the save_neighbor_lists layout
//   clusters.json   cluster levels
void export_map(const MapSnapshot& snapshot, const std::filesystem::path& dir);
MapSnapshot load_map(const std::filesystem::path& dir);

}  // namespace cartomap

#endif  // CARTOMAP_SNAPSHOT_HPP
