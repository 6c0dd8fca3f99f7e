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

#ifndef CARTOMAP_FACETS_HPP
#define CARTOMAP_FACETS_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "idset.hpp"
#include "raster.hpp"
#include "snapshot.hpp"

namespace cartomap {

// Facets computed from the snapshot structure rather than from metadata:
//   type  entity type name ("article", "word", "author", "lab")
//   lab   lab label -> the lab's related articles and authors
//   term  word label -> articles containing the word
// Any other facet name is read from the entities' metadata field of the
// same name.
inline const std::vector<std::string> kDefaultFacets = {"type", "lab", "year", "term"};

// A conjunction of facet clauses; each clause accepts any of its values.
// A clause with no values places no constraint.
//
// Text form: "lab=CERN,INRIA;year=2018". Backslash escapes the next
// character, so values may contain ',', ';', '=' or '\'.
struct FilterExpr {
  std::map<std::string, std::set<std::string>> clauses;

  static FilterExpr parse(std::string_view text);
  // Sorted, escaped text form; equal filters have equal strings.
  std::string canonical() const;
  bool unconstrained() const;

  friend bool operator==(const FilterExpr&, const FilterExpr&) = default;
};

struct FacetIndex {
  std::uint32_t universe = 0;  // entity count; ids are global snapshot ids
  std::map<std::string, std::map<std::string, CompressedIdSet>> facets;

  CompressedIdSet all() const { return CompressedIdSet::range(0, universe); }
  // (value, cardinality) pairs in value order.
  std::vector<std::pair<std::string, std::uint64_t>> catalog(const std::string& facet) const;

  // <dir>/facets.json lists every (facet, value) with its byte range in
  // <dir>/facets.bin, which holds the serialized sets back to back.
  void save(const std::filesystem::path& dir) const;
  static FacetIndex load(const std::filesystem::path& dir);
};

FacetIndex build_facet_index(const MapSnapshot& snapshot, std::span<const std::string> facets = kDefaultFacets);

// Unknown facets or values throw InvalidArgument naming them.
CompressedIdSet eval_filter(const FilterExpr& expr, const FacetIndex& index);

// Global ids per tile, for every zoom level up to zmax. Tile membership uses
// the same pixel binning as the raster module.
struct TileIndex {
  std::uint32_t zmax = 0;
  std::vector<std::vector<CompressedIdSet>> levels;  // [z][y * 2^z + x]

  const CompressedIdSet& tile(TileAddress addr) const;
  // The tile and its eight neighbors: every point that can reach the tile
  // through the blur apron.
  CompressedIdSet neighborhood(TileAddress addr) const;

  // <dir>/tiles.bin: "CMTILES1", u32 zmax, then per tile in (z, y, x) order
  // a u32 byte length and the serialized set.
  void save(const std::filesystem::path& dir) const;
  static TileIndex load(const std::filesystem::path& dir);
};

TileIndex build_tile_index(const MapSnapshot& snapshot, std::uint32_t zmax);

// Coordinates of all entities by global id.
std::vector<Point2> global_coords(const MapSnapshot& snapshot);

}  // namespace cartomap

#endif  // CARTOMAP_FACETS_HPP
