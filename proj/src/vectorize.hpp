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

#ifndef CARTOMAP_VECTORIZE_HPP
#define CARTOMAP_VECTORIZE_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "corpus.hpp"
#include "sparse.hpp"

namespace cartomap {

// Token lists carry an empty string where punctuation breaks a phrase; no
// n-gram may span such a boundary.
inline const std::string kBoundary;

using StopwordSet = std::unordered_set<std::string>;

// Bundled lists: "en", "fr", "en+fr", or "none".
const StopwordSet& stopwords(std::string_view language);

// Lower-cases ASCII, splits on whitespace and punctuation, removes stopwords.
// Bytes >= 0x80 are kept inside tokens so accented UTF-8 words survive.
std::vector<std::string> tokenize(std::string_view text, const StopwordSet& stop);

// Every contiguous run of 1..n_max tokens that does not cross a boundary,
// joined by single spaces. Occurrences are repeated (multiset).
std::vector<std::string> extract_ngrams(const std::vector<std::string>& tokens, std::size_t n_max = 5);

using TermCounts = std::unordered_map<std::string, std::uint32_t>;

TermCounts count_terms(const std::vector<std::string>& ngrams);

// Title, abstract and keywords of one record, with a boundary between parts.
TermCounts analyze_record(const CorpusRecord& record, const StopwordSet& stop, std::size_t n_max);

struct Vocabulary {
  std::vector<std::string> terms;         // column id -> term
  std::vector<std::uint32_t> df;          // documents containing the term
  std::vector<std::uint64_t> total_count; // occurrences over the corpus
  std::size_t n_max = 5;
  std::uint64_t m_min = 25;
  std::size_t v_cap = 64000;

  std::size_t size() const { return terms.size(); }
  std::optional<std::uint32_t> find(const std::string& term) const;
  void rebuild_index();

  // TSV: term, df, total_count; one line per term in column order.
  void save_tsv(const std::filesystem::path& path) const;
  static Vocabulary load_tsv(const std::filesystem::path& path);

 private:
  std::unordered_map<std::string, std::uint32_t> index_;
};

// Keeps terms whose total occurrence count is >= m_min, then the v_cap terms
// with highest df. Column order is (df desc, term asc).
Vocabulary build_vocab(std::span<const TermCounts> docs, std::uint64_t m_min, std::size_t v_cap,
                       std::size_t n_max = 5);

// tf * (ln((1+T)/(1+df)) + 1), rows L2-normalized; rows without any
// vocabulary term stay all-zero.
SparseMatrix tfidf_matrix(std::span<const TermCounts> docs, const Vocabulary& vocab);

// Sorted term ids present in each row.
std::vector<std::vector<std::uint32_t>> doc_term_sets(const SparseMatrix& m);

// Binary T x L matrix, entry (i,k) = 1 iff entity k lists article i.
SparseMatrix incidence_matrix(const EntityCatalog& catalog, EntityType type);

}  // namespace cartomap

#endif  // CARTOMAP_VECTORIZE_HPP
