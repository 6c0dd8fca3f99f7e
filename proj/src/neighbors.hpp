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

#ifndef CARTOMAP_NEIGHBORS_HPP
#define CARTOMAP_NEIGHBORS_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "embed.hpp"

namespace cartomap {

struct Neighbor {
  std::uint32_t id = 0;
  float distance = 0.0f;  // Euclidean
  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

inline bool neighbor_less(const Neighbor& a, const Neighbor& b) {
  return a.distance < b.distance || (a.distance == b.distance && a.id < b.id);
}

struct NeighborLists {
  EntityType query_type = EntityType::Article;
  EntityType target_type = EntityType::Article;
  std::uint32_t k = 10;
  std::vector<std::vector<Neighbor>> lists;  // per query, ascending (distance, id)

  friend bool operator==(const NeighborLists&, const NeighborLists&) = default;
};

float squared_l2(std::span<const float> a, std::span<const float> b);

// Brute force. When query and target types match, query i never lists itself.
NeighborLists knn_exact(const LatentEmbedding& queries, const LatentEmbedding& targets, std::uint32_t k);

struct AnnParams {
  std::size_t M = 16;                 // links per node on upper layers, 2*M on layer 0
  std::size_t ef_construction = 200;
  std::size_t ef = 128;               // default search breadth
  std::uint64_t seed = 42;
};

// Layered navigable small-world proximity graph. Build is sequential and
// deterministic given the seed; searches are read-only.
class AnnIndex {
 public:
  AnnIndex(const LatentEmbedding& targets, const AnnParams& params);

  // Up to k ids ordered by (distance, id). `exclude` removes one id.
  std::vector<Neighbor> search(std::span<const float> query, std::size_t k, std::size_t ef,
                               std::int64_t exclude = -1) const;

  std::size_t size() const { return n_; }
  std::size_t dim() const { return d_; }
  EntityType type() const { return type_; }
  const AnnParams& params() const { return params_; }
  int max_level() const { return max_level_; }
  // Adjacency of a node at a layer, for inspection.
  std::span<const std::uint32_t> links(std::uint32_t node, int level) const;

 private:
  struct Candidate {
    float dist;
    std::uint32_t id;
  };
  std::span<const float> vec(std::uint32_t i) const { return {data_.data() + static_cast<std::size_t>(i) * d_, d_}; }
  std::uint32_t greedy_descend(std::span<const float> q, int top, int bottom, float& dist) const;
  std::vector<Candidate> search_layer(std::span<const float> q, std::uint32_t entry, float entry_dist, std::size_t ef,
                                      int level, std::vector<std::uint32_t>& visited, std::uint32_t epoch) const;
  std::size_t select_neighbors(std::span<const Candidate> sorted, std::size_t m, Candidate* out) const;
  void set_links(std::uint32_t node, int level, std::span<const Candidate> picked);
  void add_link(std::uint32_t node, int level, std::uint32_t other, float dist);
  void insert(std::uint32_t id, int level, std::vector<std::uint32_t>& visited, std::uint32_t& epoch);

  EntityType type_;
  std::size_t n_;
  std::size_t d_;
  AnnParams params_;
  std::vector<float> data_;
  std::vector<int> level_of_;
  // Layer 0 is stored flat: cap0_ slots per node with cached link distances.
  std::size_t cap0_ = 0;
  std::vector<std::uint32_t> l0_ids_;
  std::vector<float> l0_dist_;
  std::vector<std::uint16_t> l0_count_;
  std::vector<std::vector<std::vector<std::uint32_t>>> upper_;  // node -> level-1 -> ids
  std::uint32_t entry_ = 0;
  int max_level_ = 0;
};

NeighborLists knn_approx(const AnnIndex& index, const LatentEmbedding& queries, std::uint32_t k, std::size_t ef);

// Binary dump of several neighbor lists: magic "CMNLIST1", u32 list count, then per
// list u8 query type, u8 target type, u32 k, u64 n, and per query u32 count
// followed by count x (u32 id, f32 distance).
void save_neighbor_lists(const std::filesystem::path& path, const std::vector<NeighborLists>& all);
std::vector<NeighborLists> load_neighbor_lists(const std::filesystem::path& path);

}  // namespace cartomap

#endif  // CARTOMAP_NEIGHBORS_HPP
