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

#ifndef CARTOMAP_PROJECT2D_HPP
#define CARTOMAP_PROJECT2D_HPP

#include <cstdint>
#include <vector>

#include "common.hpp"
#include "embed.hpp"
#include "neighbors.hpp"

namespace cartomap {

struct FuzzyEdge {
  std::uint32_t i = 0;  // i < j
  std::uint32_t j = 0;
  double w = 0.0;       // in (0, 1]
};

struct FuzzyGraph {
  std::size_t n = 0;
  std::vector<FuzzyEdge> edges;  // sorted by (i, j)
  std::vector<double> rho;
  std::vector<double> sigma;
};

// Per-node smooth kNN memberships. `distances` must be ascending.
struct Membership {
  double rho = 0.0;
  double sigma = 1.0;
  std::vector<double> weights;
};
Membership smooth_knn(const std::vector<double>& distances, double target);

FuzzyGraph fuzzy_graph(const NeighborLists& knn);

// Parameters of the low-dimensional kernel 1 / (1 + a r^(2b)).
struct CurveParams {
  double a = 0.0;
  double b = 0.0;
};
CurveParams fit_curve(double min_dist, double spread);

struct LayoutParams {
  std::size_t epochs = 200;
  std::size_t negative_samples = 5;
  double min_dist = 0.1;
  double spread = 1.0;
  double learning_rate = 1.0;
  std::uint64_t seed = 42;
};

struct Projection2D {
  std::vector<Point2> coords;
  std::vector<std::uint32_t> fitted_subset;
  std::size_t epochs = 0;
  std::uint64_t seed = 0;
};

Projection2D fit_layout(const FuzzyGraph& graph, const std::vector<Point2>& init, const LayoutParams& params);

// Places new points given their neighbors among fitted.coords. Points with a
// zero-distance neighbor are pinned onto it and not refined.
std::vector<Point2> transform(const Projection2D& fitted, const NeighborLists& knn_to_fitted,
                              std::size_t refine_epochs, const LayoutParams& params);

std::vector<Point2> normalize_coords(const std::vector<Point2>& coords);

// First two latent components, centred and scaled to unit variance.
std::vector<Point2> latent_init(const LatentEmbedding& latent);

struct ProjectionParams {
  LayoutParams layout;
  std::size_t n_neighbors = 15;
  std::size_t refine_epochs = 30;
  std::size_t max_fit = 200000;
  double subset_fraction = 1.0;
  std::size_t exact_knn_below = 4000;
  AnnParams ann;
};

// What later placements need: the fitted rows and where they landed.
struct ProjectionModel {
  LatentEmbedding fitted_latent;
  Projection2D fitted;
};

// Fits on a uniform sample of the distinct rows and transforms the rest.
// Coordinates are raw layout units; normalize_coords maps them to the unit square.
Projection2D project_latent(const LatentEmbedding& latent, const ProjectionParams& params,
                            ProjectionModel* model_out = nullptr);

std::vector<Point2> place_points(const LatentEmbedding& points, const ProjectionModel& model,
                                 const ProjectionParams& params);

}  // namespace cartomap

#endif  // CARTOMAP_PROJECT2D_HPP
