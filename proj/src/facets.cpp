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

#include "facets.hpp"

#include <algorithm>

#include "json.hpp"

namespace cartomap {

namespace {

constexpr std::string_view kIndexVersion = "cartomap-index/1";
constexpr std::string_view kTilesMagic = "CMTILES1";

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '\\' || c == ',' || c == ';' || c == '=') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

std::uint32_t tile_coord(double c, std::uint32_t z) {
  const std::size_t side = static_cast<std::size_t>(kTileSize) << z;
  const std::size_t px = std::min(side - 1, static_cast<std::size_t>(c * static_cast<double>(side)));
  return static_cast<std::uint32_t>(px / kTileSize);
}

}  // namespace

FilterExpr FilterExpr::parse(std::string_view text) {
  FilterExpr expr;
  // Split into (facet, values) on unescaped separators.
  std::string facet, token;
  std::vector<std::string> values;
  bool in_values = false, escaped_token = false;
  auto finish_token = [&] {
    std::string v = trim(token);
    if (!v.empty() || escaped_token) values.push_back(v);
    token.clear();
    escaped_token = false;
  };
  auto finish_clause = [&] {
    if (!in_values) {
      if (trim(token).empty()) {
        token.clear();
        return;
      }
      fail(ErrorCode::InvalidArgument, "filter clause '" + token + "' lacks '='");
    }
    finish_token();
    if (facet.empty()) fail(ErrorCode::InvalidArgument, "filter clause with an empty facet name");
    auto& set = expr.clauses[facet];
    set.insert(values.begin(), values.end());
    facet.clear();
    values.clear();
    in_values = false;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\\') {
      if (++i == text.size()) fail(ErrorCode::InvalidArgument, "filter ends with a dangling escape");
      token.push_back(text[i]);
      escaped_token = true;
    } else if (c == ';') {
      finish_clause();
    } else if (c == '=' && !in_values) {
      facet = trim(token);
      token.clear();
      escaped_token = false;
      in_values = true;
    } else if (c == ',' && in_values) {
      finish_token();
    } else {
      token.push_back(c);
    }
  }
  finish_clause();
  return expr;
}

std::string FilterExpr::canonical() const {
  std::string out;
  for (const auto& [facet, values] : clauses) {
    if (values.empty()) continue;
    if (!out.empty()) out.push_back(';');
    out += escape(facet);
    out.push_back('=');
    bool first = true;
    for (const auto& v : values) {
      if (!first) out.push_back(',');
      first = false;
      out += escape(v);
    }
  }
  return out;
}

bool FilterExpr::unconstrained() const {
  return std::all_of(clauses.begin(), clauses.end(), [](const auto& kv) { return kv.second.empty(); });
}

std::vector<std::pair<std::string, std::uint64_t>> FacetIndex::catalog(const std::string& facet) const {
  auto it = facets.find(facet);
  if (it == facets.end()) fail(ErrorCode::InvalidArgument, "unknown facet '" + facet + "'");
  std::vector<std::pair<std::string, std::uint64_t>> out;
  for (const auto& [value, set] : it->second) out.emplace_back(value, set.cardinality());
  return out;
}

std::vector<Point2> global_coords(const MapSnapshot& snapshot) {
  std::vector<Point2> out;
  out.reserve(snapshot.total());
  for (const auto& list : snapshot.entities) {
    for (const auto& e : list) out.push_back(e.pos);
  }
  return out;
}

FacetIndex build_facet_index(const MapSnapshot& snapshot, std::span<const std::string> facets) {
  FacetIndex index;
  index.universe = static_cast<std::uint32_t>(snapshot.total());
  const auto base = [&](EntityType t) { return snapshot.global_id(t, 0); };

  for (const auto& facet : facets) {
    if (index.facets.count(facet)) continue;
    std::map<std::string, std::vector<std::uint32_t>> members;
    if (facet == "type") {
      for (EntityType t : kAllEntityTypes) {
        auto& ids = members[std::string(type_name(t))];
        for (std::uint32_t i = 0; i < snapshot.of(t).size(); ++i) ids.push_back(base(t) + i);
      }
    } else if (facet == "lab") {
      const auto& labs = snapshot.of(EntityType::Lab);
      for (std::size_t l = 0; l < labs.size(); ++l) {
        auto& ids = members[labs[l].label];
        for (auto a : snapshot.lab_relations[l].articles) ids.push_back(base(EntityType::Article) + a);
        for (auto a : snapshot.lab_relations[l].authors) ids.push_back(base(EntityType::Author) + a);
      }
    } else if (facet == "term") {
      const auto& words = snapshot.of(EntityType::Word);
      const auto& articles = snapshot.of(EntityType::Article);
      std::vector<std::vector<std::uint32_t>> by_word(words.size());
      for (std::uint32_t a = 0; a < articles.size(); ++a) {
        for (auto w : articles[a].terms) by_word[w].push_back(base(EntityType::Article) + a);
      }
      for (std::size_t w = 0; w < words.size(); ++w) {
        auto& ids = members[words[w].label];
        ids.insert(ids.end(), by_word[w].begin(), by_word[w].end());
      }
    } else {
      bool seen = false;
      std::uint32_t gid = 0;
      for (const auto& list : snapshot.entities) {
        for (const auto& e : list) {
          auto it = e.meta.find(facet);
          if (it != e.meta.end()) {
            members[it->second].push_back(gid);
            seen = true;
          }
          ++gid;
        }
      }
      if (!seen) fail(ErrorCode::InvalidArgument, "facet '" + facet + "' references missing metadata field");
    }
    auto& out = index.facets[facet];
    for (auto& [value, ids] : members) out.emplace(value, CompressedIdSet::from_unsorted(std::move(ids)));
  }
  return index;
}

CompressedIdSet eval_filter(const FilterExpr& expr, const FacetIndex& index) {
  std::optional<CompressedIdSet> acc;
  for (const auto& [facet, values] : expr.clauses) {
    if (values.empty()) {
      if (!index.facets.count(facet)) fail(ErrorCode::InvalidArgument, "unknown facet '" + facet + "'");
      continue;
    }
    auto fit = index.facets.find(facet);
    if (fit == index.facets.end()) fail(ErrorCode::InvalidArgument, "unknown facet '" + facet + "'");
    std::vector<const CompressedIdSet*> sets;
    for (const auto& v : values) {
      auto vit = fit->second.find(v);
      if (vit == fit->second.end()) {
        fail(ErrorCode::InvalidArgument, "unknown value '" + v + "' for facet '" + facet + "'");
      }
      sets.push_back(&vit->second);
    }
    auto clause = union_all(sets);
    acc = acc ? set_intersect(*acc, clause) : std::move(clause);
  }
  return acc ? std::move(*acc) : index.all();
}

void FacetIndex::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::vector<std::uint8_t> blob;
  nlohmann::ordered_json manifest;
  manifest["version"] = kIndexVersion;
  manifest["universe"] = universe;
  nlohmann::ordered_json fj = nlohmann::ordered_json::object();
  for (const auto& [facet, values] : facets) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& [value, set] : values) {
      const auto bytes = set.serialize();
      arr.push_back({{"value", value}, {"count", set.cardinality()}, {"offset", blob.size()}, {"length", bytes.size()}});
      blob.insert(blob.end(), bytes.begin(), bytes.end());
    }
    fj[facet] = std::move(arr);
  }
  manifest["facets"] = std::move(fj);
  write_binary_file(dir / "facets.bin", blob);
  write_text_file(dir / "facets.json", manifest.dump(1) + "\n");
}

FacetIndex FacetIndex::load(const std::filesystem::path& dir) {
  const auto blob = read_binary_file(dir / "facets.bin");
  FacetIndex index;
  try {
    const auto manifest = nlohmann::json::parse(read_text_file(dir / "facets.json"));
    if (manifest.at("version").get<std::string>() != kIndexVersion) {
      fail(ErrorCode::Format, "unsupported facet index version in " + dir.string());
    }
    index.universe = manifest.at("universe").get<std::uint32_t>();
    for (const auto& [facet, arr] : manifest.at("facets").items()) {
      auto& values = index.facets[facet];
      for (const auto& entry : arr) {
        const auto offset = entry.at("offset").get<std::size_t>();
        const auto length = entry.at("length").get<std::size_t>();
        if (offset > blob.size() || length > blob.size() - offset) {
          fail(ErrorCode::Format, "facet blob range out of bounds in " + dir.string());
        }
        auto set = CompressedIdSet::deserialize(std::span(blob).subspan(offset, length));
        if (set.cardinality() != entry.at("count").get<std::uint64_t>()) {
          fail(ErrorCode::Format, "facet value count mismatch for " + facet);
        }
        values.emplace(entry.at("value").get<std::string>(), std::move(set));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Format, "malformed facet index in " + dir.string() + ": " + e.what());
  }
  return index;
}

const CompressedIdSet& TileIndex::tile(TileAddress addr) const {
  if (!addr.valid() || addr.z > zmax) fail(ErrorCode::NotFound, "tile address outside the index");
  return levels[addr.z][(static_cast<std::size_t>(addr.y) << addr.z) + addr.x];
}

CompressedIdSet TileIndex::neighborhood(TileAddress addr) const {
  const auto& self = tile(addr);
  std::vector<const CompressedIdSet*> sets;
  const std::int64_t n = std::int64_t{1} << addr.z;
  for (std::int64_t dy = -1; dy <= 1; ++dy) {
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      const std::int64_t x = addr.x + dx, y = addr.y + dy;
      if (x < 0 || y < 0 || x >= n || y >= n) continue;
      sets.push_back(&levels[addr.z][static_cast<std::size_t>(y * n + x)]);
    }
  }
  return sets.size() == 1 ? self : union_all(sets);
}

TileIndex build_tile_index(const MapSnapshot& snapshot, std::uint32_t zmax) {
  require(zmax < 16, "zmax must be below 16");
  const auto coords = global_coords(snapshot);
  TileIndex index;
  index.zmax = zmax;
  for (std::uint32_t z = 0; z <= zmax; ++z) {
    const std::size_t n = std::size_t{1} << z;
    std::vector<std::vector<std::uint32_t>> buckets(n * n);
    for (std::uint32_t id = 0; id < coords.size(); ++id) {
      buckets[tile_coord(coords[id].y, z) * n + tile_coord(coords[id].x, z)].push_back(id);
    }
    auto& level = index.levels.emplace_back();
    level.reserve(n * n);
    for (const auto& b : buckets) level.push_back(CompressedIdSet::from_sorted(b));
  }
  return index;
}

void TileIndex::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  BinaryWriter w(dir / "tiles.bin");
  w.magic(kTilesMagic);
  w.put<std::uint32_t>(zmax);
  for (const auto& level : levels) {
    for (const auto& set : level) {
      const auto bytes = set.serialize();
      w.put<std::uint32_t>(static_cast<std::uint32_t>(bytes.size()));
      w.bytes(bytes.data(), bytes.size());
    }
  }
  w.close();
}

TileIndex TileIndex::load(const std::filesystem::path& dir) {
  BinaryReader r(dir / "tiles.bin");
  r.expect_magic(kTilesMagic);
  TileIndex index;
  index.zmax = r.get<std::uint32_t>();
  if (index.zmax >= 16) fail(ErrorCode::Format, "tile index zmax out of range");
  for (std::uint32_t z = 0; z <= index.zmax; ++z) {
    auto& level = index.levels.emplace_back();
    const std::size_t count = std::size_t{1} << (2 * z);
    level.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      std::vector<std::uint8_t> bytes(r.get<std::uint32_t>());
      r.bytes(bytes.data(), bytes.size());
      level.push_back(CompressedIdSet::deserialize(bytes));
    }
  }
  if (!r.at_end()) fail(ErrorCode::Format, "trailing bytes in tiles.bin");
  return index;
}

}  // namespace cartomap
