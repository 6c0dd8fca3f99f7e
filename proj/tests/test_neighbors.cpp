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

#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cmath>

#include "neighbors.hpp"
#include "test_util.hpp"

using namespace cartomap;
using cartomap::testing::gaussian_points;
using cartomap::testing::TempDir;

namespace {

// Independent quadratic scan in double precision, full sort per query.
std::vector<std::vector<std::uint32_t>> scan_ids(const LatentEmbedding& q, const LatentEmbedding& t, std::size_t k,
                                                 bool exclude_self) {
  std::vector<std::vector<std::uint32_t>> out(q.n);
  for (std::size_t i = 0; i < q.n; ++i) {
    std::vector<std::pair<double, std::uint32_t>> all;
    for (std::size_t j = 0; j < t.n; ++j) {
      if (exclude_self && i == j) continue;
      double s = 0.0;
      for (std::size_t c = 0; c < q.d; ++c) {
        const double diff = static_cast<double>(q.row(i)[c]) - t.row(j)[c];
        s += diff * diff;
      }
      all.emplace_back(s, static_cast<std::uint32_t>(j));
    }
    std::sort(all.begin(), all.end());
    for (std::size_t r = 0; r < std::min(k, all.size()); ++r) out[i].push_back(all[r].second);
  }
  return out;
}

double recall(const NeighborLists& approx, const NeighborLists& exact) {
  std::size_t hit = 0, total = 0;
  for (std::size_t i = 0; i < exact.lists.size(); ++i) {
    total += exact.lists[i].size();
    for (const auto& a : approx.lists[i]) {
      for (const auto& e : exact.lists[i]) hit += a.id == e.id ? 1 : 0;
    }
  }
  return static_cast<double>(hit) / static_cast<double>(total);
}

LatentEmbedding line(std::initializer_list<float> xs) {
  LatentEmbedding e(EntityType::Article, xs.size(), 1);
  std::copy(xs.begin(), xs.end(), e.data.begin());
  return e;
}

}  // namespace

TEST(KnnExact, CollinearHandGeometry) {
  auto pts = line({0.0f, 1.0f, 3.0f});
  auto nl = knn_exact(pts, pts, 2);
  ASSERT_EQ(nl.lists[0].size(), 2u);
  EXPECT_EQ(nl.lists[0][0].id, 1u);
  EXPECT_FLOAT_EQ(nl.lists[0][0].distance, 1.0f);
  EXPECT_EQ(nl.lists[0][1].id, 2u);
  EXPECT_FLOAT_EQ(nl.lists[0][1].distance, 3.0f);
  EXPECT_THROW(knn_exact(pts, pts, 0), Error);
}

TEST(KnnExact, TiesBrokenByLowerIdAndNoSelfMatch) {
  auto pts = line({5.0f, 4.0f, 6.0f, 5.0f});
  auto nl = knn_exact(pts, pts, 3);
  // Point 0 sees its duplicate first, then the two equidistant points by id.
  ASSERT_EQ(nl.lists[0].size(), 3u);
  EXPECT_EQ(nl.lists[0][0].id, 3u);
  EXPECT_EQ(nl.lists[0][0].distance, 0.0f);
  EXPECT_EQ(nl.lists[0][1].id, 1u);
  EXPECT_EQ(nl.lists[0][2].id, 2u);
  for (std::size_t i = 0; i < pts.n; ++i) {
    for (const auto& nb : nl.lists[i]) EXPECT_NE(nb.id, i);
  }
}

TEST(KnnExact, MatchesQuadraticScan) {
  auto pts = gaussian_points(200, 8, 21);
  auto nl = knn_exact(pts, pts, 5);
  auto oracle = scan_ids(pts, pts, 5, true);
  for (std::size_t i = 0; i < pts.n; ++i) {
    ASSERT_EQ(nl.lists[i].size(), 5u);
    for (std::size_t r = 0; r < 5; ++r) EXPECT_EQ(nl.lists[i][r].id, oracle[i][r]) << i << "," << r;
  }
}

TEST(KnnExact, CrossTypeKeepsZeroDistanceMatch) {
  auto art = gaussian_points(30, 4, 2);
  LatentEmbedding author(EntityType::Author, 1, 4);
  std::copy(art.row(7).begin(), art.row(7).end(), author.row(0).begin());
  auto nl = knn_exact(author, art, 3);
  EXPECT_EQ(nl.query_type, EntityType::Author);
  EXPECT_EQ(nl.target_type, EntityType::Article);
  EXPECT_EQ(nl.lists[0][0].id, 7u);
  EXPECT_EQ(nl.lists[0][0].distance, 0.0f);
}

TEST(AnnIndex, SingleTarget) {
  auto one = gaussian_points(1, 5, 3);
  AnnIndex index(one, AnnParams{});
  auto q = gaussian_points(4, 5, 9, EntityType::Word);
  auto nl = knn_approx(index, q, 3, 64);
  for (const auto& l : nl.lists) {
    ASSERT_EQ(l.size(), 1u);
    EXPECT_EQ(l[0].id, 0u);
  }
}

TEST(AnnIndex, DeterministicAdjacency) {
  auto pts = gaussian_points(800, 16, 4);
  AnnParams p;
  p.seed = 11;
  AnnIndex a(pts, p), b(pts, p);
  ASSERT_EQ(a.max_level(), b.max_level());
  for (std::uint32_t i = 0; i < pts.n; ++i) {
    const auto la = a.links(i, 0), lb = b.links(i, 0);
    ASSERT_TRUE(std::equal(la.begin(), la.end(), lb.begin(), lb.end())) << i;
    EXPECT_LE(la.size(), 2 * p.M);
  }
}

TEST(AnnIndex, ExhaustiveBreadthIsExact) {
  auto pts = gaussian_points(300, 12, 5);
  AnnIndex index(pts, AnnParams{});
  auto approx = knn_approx(index, pts, 10, pts.n);
  auto exact = knn_exact(pts, pts, 10);
  EXPECT_EQ(approx, exact);
}

TEST(AnnIndex, RecallAtDefaultBreadthAndTrueDistances) {
  auto pts = gaussian_points(3000, 64, 6);
  auto held_out = gaussian_points(300, 64, 7);
  AnnIndex index(pts, AnnParams{});
  auto approx = knn_approx(index, held_out, 10, AnnParams{}.ef);
  auto exact = knn_exact(held_out, pts, 10);
  EXPECT_GE(recall(approx, exact), 0.9);
  for (std::size_t i = 0; i < held_out.n; ++i) {
    const auto& l = approx.lists[i];
    EXPECT_TRUE(std::is_sorted(l.begin(), l.end(), neighbor_less));
    for (const auto& nb : l) {
      EXPECT_FLOAT_EQ(nb.distance, std::sqrt(squared_l2(held_out.row(i), pts.row(nb.id))));
    }
  }
}

TEST(AnnIndex, DuplicatePairsReportEachOtherFirst) {
  auto base = gaussian_points(400, 10, 8);
  LatentEmbedding pts(EntityType::Article, 800, 10);
  for (std::size_t i = 0; i < 400; ++i) {
    std::copy(base.row(i).begin(), base.row(i).end(), pts.row(2 * i).begin());
    std::copy(base.row(i).begin(), base.row(i).end(), pts.row(2 * i + 1).begin());
  }
  AnnIndex index(pts, AnnParams{});
  auto nl = knn_approx(index, pts, 5, AnnParams{}.ef);
  for (std::uint32_t i = 0; i < pts.n; ++i) {
    ASSERT_FALSE(nl.lists[i].empty());
    EXPECT_EQ(nl.lists[i][0].id, i ^ 1u);
    EXPECT_EQ(nl.lists[i][0].distance, 0.0f);
  }
}

TEST(AnnIndex, MutualNearestNeighborsFoundAcrossSeeds) {
  auto pts = gaussian_points(1500, 32, 12);
  auto exact = knn_exact(pts, pts, 1);
  std::size_t mutual = 0, found = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    AnnParams p;
    p.seed = seed;
    AnnIndex index(pts, p);
    auto nl = knn_approx(index, pts, 10, p.ef);
    for (std::uint32_t a = 0; a < pts.n; ++a) {
      const std::uint32_t b = exact.lists[a][0].id;
      if (exact.lists[b][0].id != a) continue;
      ++mutual;
      for (const auto& nb : nl.lists[a]) found += nb.id == b ? 1 : 0;
    }
  }
  ASSERT_GT(mutual, 0u);
  EXPECT_GE(static_cast<double>(found) / static_cast<double>(mutual), 0.99);
}

TEST(AnnIndex, BuildTimeScalesSubQuadratically) {
  // Quadrupling n must cost well under the 16x a quadratic build would.
  auto time_build = [](std::size_t n) {
    auto pts = gaussian_points(n, 32, 13);
    const auto t0 = std::chrono::steady_clock::now();
    AnnIndex index(pts, AnnParams{});
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  const double small = time_build(2000);
  const double large = time_build(8000);
  EXPECT_LT(large / small, 8.0) << "2000: " << small << "s, 8000: " << large << "s";
}

TEST(NeighborLists, FileRoundTrip) {
  TempDir dir;
  auto pts = gaussian_points(50, 4, 14);
  auto words = gaussian_points(20, 4, 15, EntityType::Word);
  std::vector<NeighborLists> all = {knn_exact(pts, pts, 10), knn_exact(pts, words, 3)};
  save_neighbor_lists(dir / "n.bin", all);
  EXPECT_EQ(load_neighbor_lists(dir / "n.bin"), all);
  write_text_file(dir / "bad.bin", "CMNLIST1\x01");
  EXPECT_THROW(load_neighbor_lists(dir / "bad.bin"), Error);
}
