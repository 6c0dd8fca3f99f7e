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

#ifndef CARTOMAP_SPARSE_HPP
#define CARTOMAP_SPARSE_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

namespace cartomap {

// Row-compressed sparse matrix. Column indices are strictly increasing within
// a row and every stored value is finite.
class SparseMatrix {
 public:
  using Entry = std::pair<std::uint32_t, double>;

  SparseMatrix() = default;
  SparseMatrix(std::size_t n_rows, std::size_t n_cols);

  // Rows must already be sorted by column with no duplicates.
  static SparseMatrix from_rows(std::size_t n_cols, const std::vector<std::vector<Entry>>& rows);

  std::size_t n_rows() const { return row_ptr_.size() - 1; }
  std::size_t n_cols() const { return n_cols_; }
  std::size_t nnz() const { return cols_.size(); }

  std::span<const std::uint32_t> row_cols(std::size_t i) const {
    return {cols_.data() + row_ptr_[i], cols_.data() + row_ptr_[i + 1]};
  }
  std::span<const double> row_values(std::size_t i) const {
    return {values_.data() + row_ptr_[i], values_.data() + row_ptr_[i + 1]};
  }
  std::span<double> row_values(std::size_t i) {
    return {values_.data() + row_ptr_[i], values_.data() + row_ptr_[i + 1]};
  }
  double at(std::size_t i, std::uint32_t j) const;

  // Appends a row; entries must be sorted by column.
  void push_row(std::span<const Entry> entries);

  void save(const std::filesystem::path& path) const;
  static SparseMatrix load(const std::filesystem::path& path);

  friend bool operator==(const SparseMatrix&, const SparseMatrix&) = default;

 private:
  std::size_t n_cols_ = 0;
  std::vector<std::uint64_t> row_ptr_{0};
  std::vector<std::uint32_t> cols_;
  std::vector<double> values_;
};

}  // namespace cartomap

#endif  // CARTOMAP_SPARSE_HPP
