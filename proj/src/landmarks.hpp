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

#ifndef CARTOMAP_LANDMARKS_HPP
#define CARTOMAP_LANDMARKS_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "common.hpp"

namespace cartomap {

struct KMeansResult {
  std::vector<Point2> centroids;
  std::vector<std::uint32_t> assignment;
  double inertia = 0.0;
  std::size_t iterations = 0;
};

KMeansResult kmeans(std::span<const Point2> points, std::size_t k, std::uint64_t seed);

// Nearest centroid per point; ties go to the lowest cluster index.
std::vector<std::uint32_t> assign_nearest(std::span<const Point2> centroids, std::span<const Point2> points);

// Clusters whose centroids appear in each other's 3 nearest centroids.
std::vector<std::vector<std::uint32_t>> adjacent_clusters(std::span<const Point2> centroids);

struct ClusterName {
  std::uint32_t first = 0;
  std::optional<std::uint32_t> second;
  double coverage = 0.0;  // share of the cluster's articles containing `first`
};

// Ranking helpers, exposed for reuse by tests and the server.
std::vector<std::uint32_t> document_frequency(std::span<const std::vector<std::uint32_t>> doc_terms, std::size_t n_terms);

struct NamingInput {
  std::size_t k = 0;
  std::span<const std::uint32_t> article_assignment;
  std::span<const std::uint32_t> word_assignment;           // one entry per term
  std::span<const std::vector<std::uint32_t>> doc_terms;    // sorted term ids per article
  std::span<const std::string> terms;                       // for lexicographic ties
  std::vector<std::vector<std::uint32_t>> adjacency;
};

std::vector<ClusterName> name_clusters(const NamingInput& input);

struct ClusterLevel {
  std::uint32_t level = 0;
  std::size_t k = 0;
  std::vector<Point2> centroids;
  std::vector<std::uint32_t> article_assignment;
  std::vector<std::uint32_t> word_assignment;
  std::vector<ClusterName> names;
  std::vector<std::vector<std::uint32_t>> adjacency;

  // "first" or "first second".
  std::string label(std::size_t cluster, std::span<const std::string> terms) const;
};

std::vector<ClusterLevel> build_levels(std::span<const Point2> article_coords, std::span<const Point2> word_coords,
                                       std::span<const std::vector<std::uint32_t>> doc_terms,
                                       std::span<const std::string> terms, std::span<const std::size_t> ks,
                                       std::uint64_t seed);

}  // namespace cartomap

#endif  // CARTOMAP_LANDMARKS_HPP
