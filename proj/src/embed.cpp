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

#include "embed.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cartomap {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr std::string_view kModelMagic = "CMLSAMD1";
constexpr std::string_view kEmbeddingMagic = "CMEMBED1";

// Y = M * D, D is V x l.
RowMatrix times(const SparseMatrix& m, const RowMatrix& dense) {
  RowMatrix out = RowMatrix::Zero(static_cast<Eigen::Index>(m.n_rows()), dense.cols());
  for (std::size_t i = 0; i < m.n_rows(); ++i) {
    auto cols = m.row_cols(i);
    auto vals = m.row_values(i);
    auto dst = out.row(static_cast<Eigen::Index>(i));
    for (std::size_t k = 0; k < cols.size(); ++k) dst.noalias() += vals[k] * dense.row(cols[k]);
  }
  return out;
}

// Z = M^T * D, D is T x l.
RowMatrix transpose_times(const SparseMatrix& m, const RowMatrix& dense) {
  RowMatrix out = RowMatrix::Zero(static_cast<Eigen::Index>(m.n_cols()), dense.cols());
  for (std::size_t i = 0; i < m.n_rows(); ++i) {
    auto cols = m.row_cols(i);
    auto vals = m.row_values(i);
    auto src = dense.row(static_cast<Eigen::Index>(i));
    for (std::size_t k = 0; k < cols.size(); ++k) out.row(cols[k]).noalias() += vals[k] * src;
  }
  return out;
}

RowMatrix orthonormalize(const RowMatrix& y) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
  Eigen::MatrixXd thin = qr.householderQ() * Eigen::MatrixXd::Identity(y.rows(), y.cols());
  return thin;
}

}  // namespace

LatentModel fit_lsa(const SparseMatrix& m, std::size_t d, std::uint64_t seed, const LsaParams& params) {
  const std::size_t T = m.n_rows();
  const std::size_t V = m.n_cols();
  require(d >= 1, "fit_lsa: d must be >= 1");
  if (d > std::min(T, V)) {
    fail(ErrorCode::InvalidArgument, "fit_lsa: d=" + std::to_string(d) + " exceeds min(T, V)=" +
                                         std::to_string(std::min(T, V)));
  }
  for (std::size_t i = 0; i < T; ++i) {
    for (double v : m.row_values(i)) {
      if (!std::isfinite(v)) fail(ErrorCode::InvalidArgument, "fit_lsa: non-finite entry in row " + std::to_string(i));
    }
  }
  const std::size_t l = std::min(d + params.oversampling, std::min(T, V));
  const auto L = static_cast<Eigen::Index>(l);

  Rng rng(seed);
  RowMatrix omega(static_cast<Eigen::Index>(V), L);
  for (Eigen::Index i = 0; i < omega.rows(); ++i) {
    for (Eigen::Index j = 0; j < L; ++j) omega(i, j) = rng.normal();
  }
  RowMatrix q = orthonormalize(times(m, omega));
  for (std::size_t it = 0; it < params.power_iterations; ++it) {
    RowMatrix z = orthonormalize(transpose_times(m, q));
    q = orthonormalize(times(m, z));
  }
  // B^T = M^T Q is V x l; its left singular vectors are the term components.
  const RowMatrix bt = transpose_times(m, q);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr{Eigen::MatrixXd(bt)};
  const Eigen::MatrixXd qb = qr.householderQ() * Eigen::MatrixXd::Identity(bt.rows(), L);
  const Eigen::MatrixXd rb = qr.matrixQR().topRows(L).triangularView<Eigen::Upper>();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(rb, Eigen::ComputeFullU);
  const Eigen::MatrixXd u = qb * svd.matrixU();

  LatentModel model;
  model.d = d;
  model.fitted_T = T;
  model.seed = seed;
  model.term_components = u.leftCols(static_cast<Eigen::Index>(d));
  model.singular_values = svd.singularValues().head(static_cast<Eigen::Index>(d));
  for (Eigen::Index c = 0; c < model.term_components.cols(); ++c) {
    Eigen::Index arg = 0;
    model.term_components.col(c).cwiseAbs().maxCoeff(&arg);
    if (model.term_components(arg, c) < 0.0) model.term_components.col(c) *= -1.0;
  }
  return model;
}

LatentEmbedding embed_articles(const LatentModel& model, const SparseMatrix& m) {
  if (m.n_cols() != static_cast<std::size_t>(model.term_components.rows())) {
    fail(ErrorCode::InvalidArgument, "embed_articles: matrix has " + std::to_string(m.n_cols()) +
                                         " columns, model expects " +
                                         std::to_string(model.term_components.rows()));
  }
  LatentEmbedding out(EntityType::Article, m.n_rows(), model.d);
  out.seed = model.seed;
  Eigen::VectorXd acc(static_cast<Eigen::Index>(model.d));
  for (std::size_t i = 0; i < m.n_rows(); ++i) {
    acc.setZero();
    auto cols = m.row_cols(i);
    auto vals = m.row_values(i);
    for (std::size_t k = 0; k < cols.size(); ++k) acc.noalias() += vals[k] * model.term_components.row(cols[k]).transpose();
    auto dst = out.row(i);
    for (std::size_t c = 0; c < model.d; ++c) dst[c] = static_cast<float>(acc[static_cast<Eigen::Index>(c)]);
  }
  return out;
}

LatentEmbedding embed_terms(const LatentModel& model) {
  const auto V = static_cast<std::size_t>(model.term_components.rows());
  LatentEmbedding out(EntityType::Word, V, model.d);
  out.seed = model.seed;
  for (std::size_t k = 0; k < V; ++k) {
    auto dst = out.row(k);
    for (std::size_t c = 0; c < model.d; ++c) {
      const auto ci = static_cast<Eigen::Index>(c);
      dst[c] = static_cast<float>(model.term_components(static_cast<Eigen::Index>(k), ci) * model.singular_values[ci]);
    }
  }
  return out;
}

LatentEmbedding embed_aggregates(const SparseMatrix& incidence, const LatentEmbedding& articles, EntityType type) {
  if (incidence.n_rows() != articles.n) {
    fail(ErrorCode::InvalidArgument, "embed_aggregates: incidence has " + std::to_string(incidence.n_rows()) +
                                         " rows but there are " + std::to_string(articles.n) + " articles");
  }
  const std::size_t L = incidence.n_cols();
  const std::size_t d = articles.d;
  std::vector<double> acc(L * d, 0.0);
  std::vector<double> weight(L, 0.0);
  for (std::size_t i = 0; i < incidence.n_rows(); ++i) {
    auto cols = incidence.row_cols(i);
    auto vals = incidence.row_values(i);
    auto src = articles.row(i);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      double* dst = acc.data() + static_cast<std::size_t>(cols[k]) * d;
      for (std::size_t c = 0; c < d; ++c) dst[c] += vals[k] * src[c];
      weight[cols[k]] += vals[k];
    }
  }
  LatentEmbedding out(type, L, d);
  out.seed = articles.seed;
  for (std::size_t k = 0; k < L; ++k) {
    if (weight[k] <= 0.0) {
      fail(ErrorCode::Internal, "embed_aggregates: " + std::string(type_name(type)) + " " + std::to_string(k) +
                                    " has no articles");
    }
    auto dst = out.row(k);
    for (std::size_t c = 0; c < d; ++c) dst[c] = static_cast<float>(acc[k * d + c] / weight[k]);
  }
  return out;
}

void LatentModel::save(const std::filesystem::path& path) const {
  BinaryWriter w(path);
  w.magic(kModelMagic);
  w.put<std::uint64_t>(d);
  w.put<std::uint64_t>(static_cast<std::uint64_t>(term_components.rows()));
  w.put<std::uint64_t>(fitted_T);
  w.put<std::uint64_t>(seed);
  for (Eigen::Index i = 0; i < singular_values.size(); ++i) w.put<double>(singular_values[i]);
  for (Eigen::Index i = 0; i < term_components.rows(); ++i) {
    for (Eigen::Index j = 0; j < term_components.cols(); ++j) w.put<double>(term_components(i, j));
  }
  w.close();
}

LatentModel LatentModel::load(const std::filesystem::path& path) {
  BinaryReader r(path);
  r.expect_magic(kModelMagic);
  LatentModel m;
  m.d = r.get<std::uint64_t>();
  const auto V = static_cast<Eigen::Index>(r.get<std::uint64_t>());
  m.fitted_T = r.get<std::uint64_t>();
  m.seed = r.get<std::uint64_t>();
  const auto D = static_cast<Eigen::Index>(m.d);
  m.singular_values.resize(D);
  for (Eigen::Index i = 0; i < D; ++i) m.singular_values[i] = r.get<double>();
  m.term_components.resize(V, D);
  for (Eigen::Index i = 0; i < V; ++i) {
    for (Eigen::Index j = 0; j < D; ++j) m.term_components(i, j) = r.get<double>();
  }
  return m;
}

void LatentEmbedding::save(const std::filesystem::path& path) const {
  BinaryWriter w(path);
  w.magic(kEmbeddingMagic);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(type));
  w.put<std::uint64_t>(n);
  w.put<std::uint64_t>(d);
  w.put<std::uint64_t>(seed);
  for (float v : data) w.put<float>(v);
  w.close();
}

LatentEmbedding LatentEmbedding::load(const std::filesystem::path& path) {
  BinaryReader r(path);
  r.expect_magic(kEmbeddingMagic);
  const auto type = r.get<std::uint32_t>();
  if (type > 3) fail(ErrorCode::Format, "bad entity type in " + path.string());
  LatentEmbedding e;
  e.type = static_cast<EntityType>(type);
  e.n = r.get<std::uint64_t>();
  e.d = r.get<std::uint64_t>();
  e.seed = r.get<std::uint64_t>();
  e.data.resize(e.n * e.d);
  for (auto& v : e.data) v = r.get<float>();
  return e;
}

}  // namespace cartomap
