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

#include "sparse.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "common.hpp"

namespace cartomap {

namespace {
constexpr std::string_view kMagic = "CMSPARS1";
}

SparseMatrix::SparseMatrix(std::size_t n_rows, std::size_t n_cols)
    : n_cols_(n_cols), row_ptr_(n_rows + 1, 0) {}

SparseMatrix SparseMatrix::from_rows(std::size_t n_cols, const std::vector<std::vector<Entry>>& rows) {
  SparseMatrix m(0, n_cols);
  for (const auto& r : rows) m.push_row(r);
  return m;
}

void SparseMatrix::push_row(std::span<const Entry> entries) {
  std::int64_t prev = -1;
  for (const auto& [c, v] : entries) {
    if (static_cast<std::int64_t>(c) <= prev || c >= n_cols_) {
      fail(ErrorCode::InvalidArgument, "sparse row columns must be strictly increasing and < n_cols");
    }
    if (!std::isfinite(v)) fail(ErrorCode::InvalidArgument, "sparse matrix values must be finite");
    prev = c;
    cols_.push_back(c);
    values_.push_back(v);
  }
  row_ptr_.push_back(cols_.size());
}

double SparseMatrix::at(std::size_t i, std::uint32_t j) const {
  auto cols = row_cols(i);
  auto it = std::lower_bound(cols.begin(), cols.end(), j);
  if (it == cols.end() || *it != j) return 0.0;
  return row_values(i)[static_cast<std::size_t>(it - cols.begin())];
}

void SparseMatrix::save(const std::filesystem::path& path) const {
  BinaryWriter w(path);
  w.magic(kMagic);
  w.put<std::uint64_t>(n_rows());
  w.put<std::uint64_t>(n_cols_);
  w.put<std::uint64_t>(nnz());
  for (auto p : row_ptr_) w.put<std::uint64_t>(p);
  for (auto c : cols_) w.put<std::uint32_t>(c);
  for (auto v : values_) w.put<double>(v);
  w.close();
}

SparseMatrix SparseMatrix::load(const std::filesystem::path& path) {
  BinaryReader r(path);
  r.expect_magic(kMagic);
  const auto n_rows = r.get<std::uint64_t>();
  const auto n_cols = r.get<std::uint64_t>();
  const auto nnz = r.get<std::uint64_t>();
  SparseMatrix m;
  m.n_cols_ = n_cols;
  m.row_ptr_.resize(n_rows + 1);
  for (auto& p : m.row_ptr_) p = r.get<std::uint64_t>();
  m.cols_.resize(nnz);
  for (auto& c : m.cols_) c = r.get<std::uint32_t>();
  m.values_.resize(nnz);
  for (auto& v : m.values_) v = r.get<double>();
  if (m.row_ptr_.front() != 0 || m.row_ptr_.back() != nnz) {
    fail(ErrorCode::Format, "corrupt sparse matrix: " + path.string());
  }
  for (std::size_t i = 0; i < n_rows; ++i) {
    if (m.row_ptr_[i] > m.row_ptr_[i + 1]) fail(ErrorCode::Format, "corrupt sparse matrix: " + path.string());
    for (std::uint64_t k = m.row_ptr_[i]; k < m.row_ptr_[i + 1]; ++k) {
      if (m.cols_[k] >= n_cols || (k > m.row_ptr_[i] && m.cols_[k] <= m.cols_[k - 1])) {
        fail(ErrorCode::Format, "corrupt sparse matrix row " + std::to_string(i) + ": " + path.string());
      }
    }
  }
  return m;
}

}  // namespace cartomap
