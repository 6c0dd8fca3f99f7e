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

#ifndef CARTOMAP_EMBED_HPP
#define CARTOMAP_EMBED_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "common.hpp"
#include "sparse.hpp"

namespace cartomap {

struct LsaParams {
  std::size_t oversampling = 10;
  std::size_t power_iterations = 4;
};

struct LatentModel {
  std::size_t d = 0;
  Eigen::MatrixXd term_components;  // V x d, orthonormal columns
  Eigen::VectorXd singular_values;  // d, nonincreasing
  std::size_t fitted_T = 0;
  std::uint64_t seed = 0;

  void save(const std::filesystem::path& path) const;
  static LatentModel load(const std::filesystem::path& path);
};

// Dense row-major n x d matrix of 32-bit floats, one row per entity.
struct LatentEmbedding {
  EntityType type = EntityType::Article;
  std::size_t n = 0;
  std::size_t d = 0;
  std::uint64_t seed = 0;
  std::vector<float> data;

  LatentEmbedding() = default;
  LatentEmbedding(EntityType t, std::size_t rows, std::size_t dims)
      : type(t), n(rows), d(dims), data(rows * dims, 0.0f) {}

  std::span<const float> row(std::size_t i) const { return {data.data() + i * d, d}; }
  std::span<float> row(std::size_t i) { return {data.data() + i * d, d}; }

  // Header: magic "CMEMBED1", u32 type, u64 n, u64 d, u64 seed; then n*d f32.
  void save(const std::filesystem::path& path) const;
  static LatentEmbedding load(const std::filesystem::path& path);

  friend bool operator==(const LatentEmbedding&, const LatentEmbedding&) = default;
};

// Randomized truncated SVD of a T x V matrix. Each component's sign is fixed
// so that its largest-magnitude term loading is positive.
LatentModel fit_lsa(const SparseMatrix& m, std::size_t d, std::uint64_t seed, const LsaParams& params = {});

// Row i = M(i,.) * term_components.
LatentEmbedding embed_articles(const LatentModel& model, const SparseMatrix& m);

// Row k = term_components(k,.) scaled by the singular values.
LatentEmbedding embed_terms(const LatentModel& model);

// Row k = mean of the article vectors listed in column k of the incidence matrix.
LatentEmbedding embed_aggregates(const SparseMatrix& incidence, const LatentEmbedding& articles,
                                 EntityType type);

}  // namespace cartomap

#endif  // CARTOMAP_EMBED_HPP
