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

#include "neighbors.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <queue>
#include <string>

namespace cartomap {

float squared_l2(std::span<const float> a, std::span<const float> b) {
  // Two 8-lane accumulators; memcpy keeps the loads unaligned-safe.
  using v8 = float __attribute__((vector_size(32)));
  const std::size_t n = a.size();
  const float* pa = a.data();
  const float* pb = b.data();
  v8 acc0 = {}, acc1 = {};
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    v8 x0, y0, x1, y1;
    std::memcpy(&x0, pa + i, sizeof(v8));
    std::memcpy(&y0, pb + i, sizeof(v8));
    std::memcpy(&x1, pa + i + 8, sizeof(v8));
    std::memcpy(&y1, pb + i + 8, sizeof(v8));
    const v8 t0 = x0 - y0;
    const v8 t1 = x1 - y1;
    acc0 += t0 * t0;
    acc1 += t1 * t1;
  }
  acc0 += acc1;
  float tail = 0.0f;
  for (; i < n; ++i) {
    const float t = pa[i] - pb[i];
    tail += t * t;
  }
  return ((acc0[0] + acc0[1]) + (acc0[2] + acc0[3])) + ((acc0[4] + acc0[5]) + (acc0[6] + acc0[7])) + tail;
}

namespace {

struct ByDistance {
  bool operator()(const Neighbor& a, const Neighbor& b) const { return neighbor_less(a, b); }
};

void finalize(std::vector<Neighbor>& list) {
  for (auto& nb : list) nb.distance = std::sqrt(nb.distance);
  std::sort(list.begin(), list.end(), neighbor_less);
}

struct VisitScratch {
  std::vector<std::uint32_t> marks;
  std::uint32_t epoch = 0;

  void begin(std::size_t n) {
    if (marks.size() != n || epoch == UINT32_MAX) {
      marks.assign(n, 0);
      epoch = 0;
    }
    ++epoch;
  }
};

}  // namespace

NeighborLists knn_exact(const LatentEmbedding& queries, const LatentEmbedding& targets, std::uint32_t k) {
  require(k >= 1, "knn: k must be >= 1");
  require(queries.d == targets.d, "knn: query and target dimensions differ");
  const bool same = queries.type == targets.type;
  NeighborLists out{queries.type, targets.type, k, std::vector<std::vector<Neighbor>>(queries.n)};
  // Max-heap of squared distances keyed by (distance, id).
  for (std::size_t q = 0; q < queries.n; ++q) {
    std::priority_queue<Neighbor, std::vector<Neighbor>, ByDistance> heap;
    const auto qv = queries.row(q);
    for (std::size_t t = 0; t < targets.n; ++t) {
      if (same && t == q) continue;
      const Neighbor cand{static_cast<std::uint32_t>(t), squared_l2(qv, targets.row(t))};
      if (heap.size() < k) {
        heap.push(cand);
      } else if (neighbor_less(cand, heap.top())) {
        heap.pop();
        heap.push(cand);
      }
    }
    auto& list = out.lists[q];
    list.reserve(heap.size());
    while (!heap.empty()) {
      list.push_back(heap.top());
      heap.pop();
    }
    finalize(list);
  }
  return out;
}

AnnIndex::AnnIndex(const LatentEmbedding& targets, const AnnParams& params)
    : type_(targets.type), n_(targets.n), d_(targets.d), params_(params), data_(targets.data) {
  require(n_ >= 1, "build_ann_index: no targets");
  require(n_ < UINT32_MAX, "build_ann_index: too many targets");
  require(params_.M >= 2 && params_.M <= 1024, "build_ann_index: M must be in [2, 1024]");
  params_.ef_construction = std::max(params_.ef_construction, params_.M);
  cap0_ = 2 * params_.M;
  level_of_.resize(n_);
  l0_ids_.assign(n_ * cap0_, 0);
  l0_dist_.assign(n_ * cap0_, 0.0f);
  l0_count_.assign(n_, 0);
  upper_.resize(n_);
  Rng rng(params_.seed);
  const double ml = 1.0 / std::log(static_cast<double>(params_.M));
  for (std::size_t i = 0; i < n_; ++i) {
    double u = rng.uniform();
    if (u <= 0.0) u = 0x1.0p-53;
    level_of_[i] = std::min(16, static_cast<int>(std::floor(-std::log(u) * ml)));
    upper_[i].resize(static_cast<std::size_t>(level_of_[i]));
  }
  VisitScratch scratch;
  entry_ = 0;
  max_level_ = level_of_[0];
  for (std::uint32_t i = 1; i < n_; ++i) {
    scratch.begin(n_);
    insert(i, level_of_[i], scratch.marks, scratch.epoch);
  }
}

std::span<const std::uint32_t> AnnIndex::links(std::uint32_t node, int level) const {
  require(node < n_ && level >= 0 && level <= level_of_[node], "ann: no such node or level");
  if (level == 0) return {l0_ids_.data() + static_cast<std::size_t>(node) * cap0_, l0_count_[node]};
  return upper_[node][static_cast<std::size_t>(level - 1)];
}

namespace {

inline void prefetch(const void* p) { __builtin_prefetch(p, 0, 1); }

inline bool cand_closer(float da, std::uint32_t ia, float db, std::uint32_t ib) {
  return da < db || (da == db && ia < ib);
}

}  // namespace

std::uint32_t AnnIndex::greedy_descend(std::span<const float> q, int top, int bottom, float& dist) const {
  std::uint32_t cur = entry_;
  dist = squared_l2(q, vec(cur));
  for (int lc = top; lc > bottom; --lc) {
    bool changed = true;
    while (changed) {
      changed = false;
      for (std::uint32_t nb : links(cur, lc)) {
        const float dd = squared_l2(q, vec(nb));
        if (cand_closer(dd, nb, dist, cur)) {
          cur = nb;
          dist = dd;
          changed = true;
        }
      }
    }
  }
  return cur;
}

std::vector<AnnIndex::Candidate> AnnIndex::search_layer(std::span<const float> q, std::uint32_t entry,
                                                        float entry_dist, std::size_t ef, int level,
                                                        std::vector<std::uint32_t>& visited,
                                                        std::uint32_t epoch) const {
  auto closer = [](const Candidate& a, const Candidate& b) { return cand_closer(a.dist, a.id, b.dist, b.id); };
  auto farther = [&](const Candidate& a, const Candidate& b) { return closer(b, a); };
  // candidates: min-heap; results: max-heap.
  std::vector<Candidate> cand_store, result_store;
  cand_store.reserve(ef * 4);
  result_store.reserve(ef + 1);
  std::priority_queue<Candidate, std::vector<Candidate>, decltype(farther)> candidates(farther, std::move(cand_store));
  std::priority_queue<Candidate, std::vector<Candidate>, decltype(closer)> results(closer, std::move(result_store));
  const Candidate start{entry_dist, entry};
  candidates.push(start);
  results.push(start);
  visited[entry] = epoch;
  while (!candidates.empty()) {
    const Candidate c = candidates.top();
    if (results.size() >= ef && closer(results.top(), c)) break;
    candidates.pop();
    const auto nbs = links(c.id, level);
    for (std::uint32_t nb : nbs) prefetch(data_.data() + static_cast<std::size_t>(nb) * d_);
    for (std::uint32_t nb : nbs) {
      if (visited[nb] == epoch) continue;
      visited[nb] = epoch;
      const Candidate e{squared_l2(q, vec(nb)), nb};
      if (results.size() < ef || closer(e, results.top())) {
        candidates.push(e);
        results.push(e);
        if (results.size() > ef) results.pop();
      }
    }
  }
  std::vector<Candidate> out(results.size());
  for (std::size_t i = out.size(); i-- > 0;) {
    out[i] = results.top();
    results.pop();
  }
  return out;
}

// Diversity heuristic: keep a candidate only if it is closer to the base
// point than to every candidate already kept. Input must be sorted.
std::size_t AnnIndex::select_neighbors(std::span<const Candidate> sorted, std::size_t m, Candidate* out) const {
  std::size_t kept = 0;
  for (const auto& c : sorted) {
    if (kept >= m) break;
    bool keep = true;
    const auto cv = vec(c.id);
    for (std::size_t j = 0; j < kept; ++j) {
      if (squared_l2(cv, vec(out[j].id)) < c.dist) {
        keep = false;
        break;
      }
    }
    if (keep) out[kept++] = c;
  }
  return kept;
}

void AnnIndex::add_link(std::uint32_t node, int level, std::uint32_t other, float dist) {
  const std::size_t cap = level == 0 ? cap0_ : params_.M;
  std::vector<Candidate> cands;
  if (level == 0) {
    std::uint32_t* ids = l0_ids_.data() + static_cast<std::size_t>(node) * cap0_;
    float* ds = l0_dist_.data() + static_cast<std::size_t>(node) * cap0_;
    auto& count = l0_count_[node];
    if (count < cap) {
      ids[count] = other;
      ds[count] = dist;
      ++count;
      return;
    }
    cands.reserve(cap + 1);
    for (std::size_t j = 0; j < count; ++j) cands.push_back({ds[j], ids[j]});
  } else {
    auto& list = upper_[node][static_cast<std::size_t>(level - 1)];
    if (list.size() < cap) {
      list.push_back(other);
      return;
    }
    cands.reserve(cap + 1);
    for (std::uint32_t x : list) cands.push_back({squared_l2(vec(node), vec(x)), x});
  }
  cands.push_back({dist, other});
  std::sort(cands.begin(), cands.end(),
            [](const Candidate& a, const Candidate& b) { return cand_closer(a.dist, a.id, b.dist, b.id); });
  std::vector<Candidate> picked(cap);
  const std::size_t kept = select_neighbors(cands, cap, picked.data());
  set_links(node, level, std::span<const Candidate>(picked.data(), kept));
}

void AnnIndex::set_links(std::uint32_t node, int level, std::span<const Candidate> picked) {
  if (level == 0) {
    std::uint32_t* ids = l0_ids_.data() + static_cast<std::size_t>(node) * cap0_;
    float* ds = l0_dist_.data() + static_cast<std::size_t>(node) * cap0_;
    for (std::size_t j = 0; j < picked.size(); ++j) {
      ids[j] = picked[j].id;
      ds[j] = picked[j].dist;
    }
    l0_count_[node] = static_cast<std::uint16_t>(picked.size());
  } else {
    auto& list = upper_[node][static_cast<std::size_t>(level - 1)];
    list.clear();
    for (const auto& c : picked) list.push_back(c.id);
  }
}

void AnnIndex::insert(std::uint32_t id, int level, std::vector<std::uint32_t>& visited, std::uint32_t& epoch) {
  const auto q = vec(id);
  float cur_dist = 0.0f;
  std::uint32_t cur = greedy_descend(q, max_level_, level, cur_dist);
  std::vector<Candidate> picked(params_.M);
  for (int lc = std::min(level, max_level_); lc >= 0; --lc) {
    if (lc != std::min(level, max_level_)) {
      if (++epoch == 0) {
        std::fill(visited.begin(), visited.end(), 0);
        epoch = 1;
      }
    }
    auto found = search_layer(q, cur, cur_dist, params_.ef_construction, lc, visited, epoch);
    const std::size_t kept = select_neighbors(found, params_.M, picked.data());
    set_links(id, lc, std::span<const Candidate>(picked.data(), kept));
    for (std::size_t j = 0; j < kept; ++j) add_link(picked[j].id, lc, id, picked[j].dist);
    cur = found.front().id;
    cur_dist = found.front().dist;
  }
  if (level > max_level_) {
    max_level_ = level;
    entry_ = id;
  }
}

std::vector<Neighbor> AnnIndex::search(std::span<const float> query, std::size_t k, std::size_t ef,
                                       std::int64_t exclude) const {
  require(k >= 1, "knn: k must be >= 1");
  require(query.size() == d_, "knn: query dimension differs from index");
  thread_local VisitScratch scratch;
  float cur_dist = 0.0f;
  const std::uint32_t cur = greedy_descend(query, max_level_, 0, cur_dist);
  scratch.begin(n_);
  const std::size_t want = k + (exclude >= 0 ? 1 : 0);
  auto found = search_layer(query, cur, cur_dist, std::max(ef, want), 0, scratch.marks, scratch.epoch);
  std::vector<Neighbor> out;
  out.reserve(want);
  for (const auto& c : found) {
    if (static_cast<std::int64_t>(c.id) == exclude) continue;
    out.push_back({c.id, c.dist});
    if (out.size() == k) break;
  }
  finalize(out);
  return out;
}

NeighborLists knn_approx(const AnnIndex& index, const LatentEmbedding& queries, std::uint32_t k, std::size_t ef) {
  require(k >= 1, "knn: k must be >= 1");
  require(queries.d == index.dim(), "knn: query and index dimensions differ");
  const bool same = queries.type == index.type();
  NeighborLists out{queries.type, index.type(), k, std::vector<std::vector<Neighbor>>(queries.n)};
  for (std::size_t q = 0; q < queries.n; ++q) {
    out.lists[q] = index.search(queries.row(q), k, ef, same ? static_cast<std::int64_t>(q) : -1);
  }
  return out;
}

namespace {
constexpr std::string_view kListMagic = "CMNLIST1";
}

void save_neighbor_lists(const std::filesystem::path& path, const std::vector<NeighborLists>& all) {
  BinaryWriter w(path);
  w.magic(kListMagic);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(all.size()));
  for (const auto& nl : all) {
    w.put<std::uint8_t>(static_cast<std::uint8_t>(nl.query_type));
    w.put<std::uint8_t>(static_cast<std::uint8_t>(nl.target_type));
    w.put<std::uint32_t>(nl.k);
    w.put<std::uint64_t>(nl.lists.size());
    for (const auto& list : nl.lists) {
      w.put<std::uint32_t>(static_cast<std::uint32_t>(list.size()));
      for (const auto& nb : list) {
        w.put<std::uint32_t>(nb.id);
        w.put<float>(nb.distance);
      }
    }
  }
  w.close();
}

std::vector<NeighborLists> load_neighbor_lists(const std::filesystem::path& path) {
  BinaryReader r(path);
  r.expect_magic(kListMagic);
  const auto count = r.get<std::uint32_t>();
  std::vector<NeighborLists> all(count);
  for (auto& nl : all) {
    const auto qt = r.get<std::uint8_t>();
    const auto tt = r.get<std::uint8_t>();
    if (qt > 3 || tt > 3) fail(ErrorCode::Format, "bad entity type in " + path.string());
    nl.query_type = static_cast<EntityType>(qt);
    nl.target_type = static_cast<EntityType>(tt);
    nl.k = r.get<std::uint32_t>();
    nl.lists.resize(r.get<std::uint64_t>());
    for (auto& list : nl.lists) {
      list.resize(r.get<std::uint32_t>());
      for (auto& nb : list) {
        nb.id = r.get<std::uint32_t>();
        nb.distance = r.get<float>();
      }
    }
  }
  return all;
}

}  // namespace cartomap
