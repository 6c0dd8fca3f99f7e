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

#include <cmath>
#include <map>

#include "project2d.hpp"
#include "test_util.hpp"

using namespace cartomap;
using cartomap::testing::gaussian_blobs;
using cartomap::testing::trustworthiness;

namespace {

NeighborLists lists_from(std::vector<std::vector<Neighbor>> lists, std::uint32_t k) {
  return NeighborLists{EntityType::Article, EntityType::Article, k, std::move(lists)};
}

double dist(const Point2& a, const Point2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

}  // namespace

TEST(SmoothKnn, NearestWeightIsOneAndBandwidthHitsTarget) {
  const std::vector<double> d = {0.5, 0.7, 0.9, 1.4, 2.0, 2.2};
  const double target = std::log2(6.0);
  auto m = smooth_knn(d, target);
  EXPECT_EQ(m.rho, 0.5);
  EXPECT_EQ(m.weights[0], 1.0);
  double sum = 0.0;
  for (std::size_t r = 0; r < d.size(); ++r) {
    sum += m.weights[r];
    EXPECT_NEAR(m.weights[r], std::exp(-(d[r] - 0.5) / m.sigma), 1e-15);
  }
  EXPECT_NEAR(sum, target, 1e-5);
}

TEST(SmoothKnn, EquidistantNeighborsAllGetUnitWeight) {
  // Every gap to rho is zero, so each weight is exp(0) regardless of sigma.
  auto m = smooth_knn({1.0, 1.0, 1.0, 1.0}, 2.0);
  for (double w : m.weights) EXPECT_EQ(w, 1.0);
  EXPECT_GT(m.sigma, 0.0);
}

TEST(FuzzyGraph, SymmetrisedProbabilisticUnion) {
  // 0 -> 1 strongly; 1 does not list 0; 2 lists 0 and 1.
  auto knn = lists_from({{{1, 1.0f}, {2, 2.0f}}, {{2, 1.0f}, {3, 3.0f}}, {{0, 1.0f}, {1, 1.5f}}, {{2, 0.5f}, {1, 0.8f}}}, 2);
  auto g = fuzzy_graph(knn);
  ASSERT_EQ(g.n, 4u);
  std::map<std::pair<std::uint32_t, std::uint32_t>, double> w;
  for (const auto& e : g.edges) {
    EXPECT_LT(e.i, e.j);
    EXPECT_GT(e.w, 0.0);
    EXPECT_LE(e.w, 1.0);
    w[{e.i, e.j}] = e.w;
  }
  // 0 -> 1 is its nearest (weight 1); union with anything stays 1.
  EXPECT_EQ(w.at({0, 1}), 1.0);
  // 0 -> 2 and 2 -> 0 both contribute: a + b - ab.
  const auto m0 = smooth_knn({1.0, 2.0}, 1.0);
  const double a = m0.weights[1];
  const double b = 1.0;  // 2's nearest is 0
  EXPECT_NEAR(w.at({0, 2}), a + b - a * b, 1e-12);
  EXPECT_EQ(g.rho[3], 0.5);
  EXPECT_THROW(fuzzy_graph(lists_from({{{1, 1.0f}}, {}}, 2)), Error);
}

TEST(FitCurve, MatchesReferenceLeastSquares) {
  auto c = fit_curve(0.1, 1.0);
  EXPECT_NEAR(c.a, 1.57694346, 1e-4);
  EXPECT_NEAR(c.b, 0.89506088, 1e-4);
}

TEST(FitLayout, TwoConnectedPointsNeitherCollapseNorExplode) {
  FuzzyGraph g;
  g.n = 2;
  g.edges = {{0, 1, 1.0}};
  g.rho = {1.0, 1.0};
  g.sigma = {1.0, 1.0};
  auto p = fit_layout(g, {{0.0, 0.0}, {1.0, 0.5}}, LayoutParams{});
  const double sep = dist(p.coords[0], p.coords[1]);
  EXPECT_GE(sep, 0.05);
  EXPECT_LE(sep, 2.0);
  LayoutParams zero;
  zero.epochs = 0;
  EXPECT_THROW(fit_layout(g, {{0, 0}, {1, 1}}, zero), Error);
}

TEST(FitLayout, DisconnectedCliquesSeparateAndRunIsDeterministic) {
  FuzzyGraph g;
  g.n = 20;
  for (std::uint32_t i = 0; i < 20; ++i) {
    for (std::uint32_t j = i + 1; j < 20; ++j) {
      if ((i < 10) == (j < 10)) g.edges.push_back({i, j, 1.0});
    }
  }
  g.rho.assign(20, 0.0);
  g.sigma.assign(20, 1.0);
  Rng rng(3);
  std::vector<Point2> init(20);
  for (auto& p : init) p = {rng.normal(), rng.normal()};
  auto p = fit_layout(g, init, LayoutParams{});
  Point2 c[2] = {{0, 0}, {0, 0}};
  for (std::size_t i = 0; i < 20; ++i) {
    c[i / 10].x += p.coords[i].x / 10.0;
    c[i / 10].y += p.coords[i].y / 10.0;
  }
  double radius = 0.0;
  for (std::size_t i = 0; i < 20; ++i) radius = std::max(radius, dist(p.coords[i], c[i / 10]));
  EXPECT_GT(dist(c[0], c[1]), radius);
  auto again = fit_layout(g, init, LayoutParams{});
  EXPECT_EQ(again.coords, p.coords);
}

TEST(Transform, ZeroDistanceNeighborDominatesAndNoRefineIsWeightedMean) {
  Projection2D fitted;
  fitted.coords = {{0.0, 0.0}, {4.0, 0.0}, {0.0, 2.0}};
  auto knn = NeighborLists{EntityType::Word, EntityType::Article, 3,
                           {{{1, 0.0f}, {0, 1.0f}, {2, 2.0f}}, {{0, 0.5f}, {1, 1.0f}, {2, 1.5f}}}};
  LayoutParams params;
  auto placed = transform(fitted, knn, 0, params);
  EXPECT_EQ(placed[0], fitted.coords[1]);
  const auto m = smooth_knn({0.5, 1.0, 1.5}, std::log2(3.0));
  const double total = m.weights[0] + m.weights[1] + m.weights[2];
  EXPECT_NEAR(placed[1].x, (m.weights[1] * 4.0) / total, 1e-12);
  EXPECT_NEAR(placed[1].y, (m.weights[2] * 2.0) / total, 1e-12);
  // Refinement leaves pinned points alone.
  auto refined = transform(fitted, knn, 30, params);
  EXPECT_EQ(refined[0], fitted.coords[1]);
  auto isolated = NeighborLists{EntityType::Word, EntityType::Article, 3, {{}}};
  EXPECT_THROW(transform(fitted, isolated, 0, params), Error);
}

TEST(NormalizeCoords, HandAffineAndDegenerateCases) {
  auto out = normalize_coords({{0.0, 0.0}, {10.0, 10.0}});
  EXPECT_NEAR(out[0].x, 0.02, 1e-12);
  EXPECT_NEAR(out[0].y, 0.02, 1e-12);
  EXPECT_NEAR(out[1].x, 0.98, 1e-12);
  EXPECT_NEAR(out[1].y, 0.98, 1e-12);
  // Short axis is padded around the centre.
  auto wide = normalize_coords({{0.0, 0.0}, {10.0, 5.0}});
  EXPECT_NEAR(wide[0].y, 0.5 - 0.24, 1e-12);
  EXPECT_NEAR(wide[1].y, 0.5 + 0.24, 1e-12);
  auto single = normalize_coords({{3.0, -7.0}});
  EXPECT_EQ(single[0], (Point2{0.5, 0.5}));
  std::vector<Point2> square = {{0.1, 0.9}, {0.3, 0.2}, {0.8, 0.5}, {0.6, 0.1}};
  auto again = normalize_coords(square);
  for (std::size_t i = 0; i < square.size(); ++i) {
    for (std::size_t j = 0; j < square.size(); ++j) {
      EXPECT_EQ(square[i].x < square[j].x, again[i].x < again[j].x);
      EXPECT_EQ(square[i].y < square[j].y, again[i].y < again[j].y);
    }
  }
}

TEST(ProjectLatent, TrustworthinessOnFiveBlobs) {
  std::vector<std::uint32_t> label;
  auto latent = gaussian_blobs(1000, 20, 5, 1.0, 17, label);
  ProjectionParams params;
  auto p = project_latent(latent, params);
  const auto coords = normalize_coords(p.coords);
  for (const auto& c : coords) {
    EXPECT_GE(c.x, 0.0);
    EXPECT_LE(c.x, 1.0);
  }
  EXPECT_GE(trustworthiness(latent, coords, 10), 0.80);
}

TEST(ProjectLatent, SubsetFitThenTransformKeepsBlobs) {
  std::vector<std::uint32_t> label;
  auto latent = gaussian_blobs(1500, 20, 3, 1.0, 23, label);
  ProjectionParams params;
  params.subset_fraction = 0.2;
  auto p = project_latent(latent, params);
  ASSERT_EQ(p.fitted_subset.size(), 300u);
  std::vector<bool> fitted(latent.n, false);
  for (auto id : p.fitted_subset) fitted[id] = true;
  Point2 centroid[3] = {};
  double count[3] = {};
  for (auto id : p.fitted_subset) {
    centroid[label[id]].x += p.coords[id].x;
    centroid[label[id]].y += p.coords[id].y;
    count[label[id]] += 1.0;
  }
  for (int b = 0; b < 3; ++b) {
    centroid[b].x /= count[b];
    centroid[b].y /= count[b];
  }
  std::size_t good = 0, total = 0;
  for (std::size_t i = 0; i < latent.n; ++i) {
    if (fitted[i]) continue;
    ++total;
    int best = 0;
    for (int b = 1; b < 3; ++b) {
      if (dist(p.coords[i], centroid[b]) < dist(p.coords[i], centroid[best])) best = b;
    }
    good += best == static_cast<int>(label[i]) ? 1 : 0;
  }
  EXPECT_GE(static_cast<double>(good) / static_cast<double>(total), 0.9);
}

TEST(ProjectLatent, DuplicatesCoincideAndRunsRepeat) {
  std::vector<std::uint32_t> label;
  auto latent = gaussian_blobs(300, 8, 3, 1.0, 5, label);
  for (std::size_t i = 0; i < 20; ++i) {
    std::copy(latent.row(i).begin(), latent.row(i).end(), latent.row(100 + i).begin());
  }
  ProjectionParams params;
  params.subset_fraction = 0.5;
  auto p = project_latent(latent, params);
  for (std::size_t i = 0; i < 20; ++i) EXPECT_LE(dist(p.coords[i], p.coords[100 + i]), 1e-3);
  EXPECT_EQ(project_latent(latent, params).coords, p.coords);
}

TEST(ProjectLatent, TinyInputs) {
  LatentEmbedding one(EntityType::Article, 1, 3);
  auto p = project_latent(one, ProjectionParams{});
  EXPECT_EQ(normalize_coords(p.coords)[0], (Point2{0.5, 0.5}));
  LatentEmbedding two(EntityType::Article, 2, 3);
  two.data = {0, 0, 0, 1, 1, 1};
  auto q = project_latent(two, ProjectionParams{});
  EXPECT_NE(q.coords[0], q.coords[1]);
}

TEST(PlacePoints, OtherTypesLandOnTheirArticles) {
  std::vector<std::uint32_t> label;
  auto latent = gaussian_blobs(200, 6, 2, 1.0, 9, label);
  ProjectionModel model;
  auto p = project_latent(latent, ProjectionParams{}, &model);
  LatentEmbedding authors(EntityType::Author, 2, 6);
  std::copy(latent.row(5).begin(), latent.row(5).end(), authors.row(0).begin());
  std::copy(latent.row(6).begin(), latent.row(6).end(), authors.row(1).begin());
  auto placed = place_points(authors, model, ProjectionParams{});
  EXPECT_EQ(placed[0], p.coords[5]);
  EXPECT_EQ(placed[1], p.coords[6]);
}
