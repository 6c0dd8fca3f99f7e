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

#include "vectorize.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>

namespace cartomap {

namespace {

enum class CharClass { Word, Space, Break };

CharClass classify(unsigned char c) {
  if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80) {
    return CharClass::Word;
  }
  // Apostrophes and hyphens split words without ending the phrase.
  if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\'' || c == '-') return CharClass::Space;
  return CharClass::Break;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text, const StopwordSet& stop) {
  std::vector<std::string> out;
  bool pending_break = false;
  std::string cur;
  auto flush = [&] {
    if (cur.empty()) return;
    std::string tok = to_lower_ascii(cur);
    cur.clear();
    if (stop.contains(tok)) return;
    if (pending_break && !out.empty()) out.push_back(kBoundary);
    pending_break = false;
    out.push_back(std::move(tok));
  };
  for (char ch : text) {
    switch (classify(static_cast<unsigned char>(ch))) {
      case CharClass::Word: cur.push_back(ch); break;
      case CharClass::Space: flush(); break;
      case CharClass::Break:
        flush();
        pending_break = true;
        break;
    }
  }
  flush();
  return out;
}

std::vector<std::string> extract_ngrams(const std::vector<std::string>& tokens, std::size_t n_max) {
  require(n_max >= 1, "extract_ngrams: n_max must be >= 1");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].empty()) continue;
    std::string gram;
    for (std::size_t n = 0; n < n_max && i + n < tokens.size(); ++n) {
      const auto& t = tokens[i + n];
      if (t.empty()) break;
      if (n) gram.push_back(' ');
      gram += t;
      out.push_back(gram);
    }
  }
  return out;
}

TermCounts count_terms(const std::vector<std::string>& ngrams) {
  TermCounts c;
  for (const auto& g : ngrams) ++c[g];
  return c;
}

TermCounts analyze_record(const CorpusRecord& record, const StopwordSet& stop, std::size_t n_max) {
  std::string text = record.title;
  text += " . ";
  text += record.abstract;
  for (const auto& k : record.keywords) {
    text += " . ";
    text += k;
  }
  return count_terms(extract_ngrams(tokenize(text, stop), n_max));
}

std::optional<std::uint32_t> Vocabulary::find(const std::string& term) const {
  auto it = index_.find(term);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void Vocabulary::rebuild_index() {
  index_.clear();
  index_.reserve(terms.size());
  for (std::size_t i = 0; i < terms.size(); ++i) index_.emplace(terms[i], static_cast<std::uint32_t>(i));
}

void Vocabulary::save_tsv(const std::filesystem::path& path) const {
  std::ostringstream ss;
  ss << "# n_max=" << n_max << " m_min=" << m_min << " v_cap=" << v_cap << "\n";
  for (std::size_t i = 0; i < terms.size(); ++i) {
    ss << terms[i] << '\t' << df[i] << '\t' << total_count[i] << '\n';
  }
  write_text_file(path, ss.str());
}

Vocabulary Vocabulary::load_tsv(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  std::istringstream in(text);
  Vocabulary v;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hs(line.substr(1));
      std::string kv;
      while (hs >> kv) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) continue;
        const auto key = kv.substr(0, eq);
        const auto val = std::stoull(kv.substr(eq + 1));
        if (key == "n_max") v.n_max = val;
        if (key == "m_min") v.m_min = val;
        if (key == "v_cap") v.v_cap = val;
      }
      continue;
    }
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) {
      fail(ErrorCode::Format, path.string() + ":" + std::to_string(lineno) + ": malformed vocabulary line");
    }
    v.terms.push_back(line.substr(0, t1));
    v.df.push_back(static_cast<std::uint32_t>(std::stoul(line.substr(t1 + 1, t2 - t1 - 1))));
    v.total_count.push_back(std::stoull(line.substr(t2 + 1)));
  }
  v.rebuild_index();
  return v;
}

Vocabulary build_vocab(std::span<const TermCounts> docs, std::uint64_t m_min, std::size_t v_cap,
                       std::size_t n_max) {
  require(!docs.empty(), "build_vocab: no documents");
  struct Stat {
    std::uint32_t df = 0;
    std::uint64_t total = 0;
  };
  std::unordered_map<std::string_view, Stat> stats;
  for (const auto& d : docs) {
    for (const auto& [term, count] : d) {
      auto& s = stats[term];
      ++s.df;
      s.total += count;
    }
  }
  std::vector<std::pair<std::string_view, Stat>> kept;
  for (const auto& [term, s] : stats) {
    if (s.total >= m_min) kept.emplace_back(term, s);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second.df != b.second.df) return a.second.df > b.second.df;
    return a.first < b.first;
  });
  if (kept.size() > v_cap) kept.resize(v_cap);
  if (kept.empty()) {
    fail(ErrorCode::InvalidArgument, "empty vocabulary: no term reaches m_min=" + std::to_string(m_min) +
                                         " occurrences (thresholds too strict for this corpus)");
  }
  Vocabulary v;
  v.n_max = n_max;
  v.m_min = m_min;
  v.v_cap = v_cap;
  for (const auto& [term, s] : kept) {
    v.terms.emplace_back(term);
    v.df.push_back(s.df);
    v.total_count.push_back(s.total);
  }
  v.rebuild_index();
  return v;
}

SparseMatrix tfidf_matrix(std::span<const TermCounts> docs, const Vocabulary& vocab) {
  const double T = static_cast<double>(docs.size());
  std::vector<double> idf(vocab.size());
  for (std::size_t j = 0; j < vocab.size(); ++j) {
    idf[j] = std::log((1.0 + T) / (1.0 + static_cast<double>(vocab.df[j]))) + 1.0;
  }
  SparseMatrix m(0, vocab.size());
  std::vector<SparseMatrix::Entry> row;
  for (const auto& d : docs) {
    row.clear();
    for (const auto& [term, count] : d) {
      if (auto j = vocab.find(term)) row.emplace_back(*j, static_cast<double>(count) * idf[*j]);
    }
    std::sort(row.begin(), row.end());
    double norm = 0.0;
    for (const auto& e : row) norm += e.second * e.second;
    norm = std::sqrt(norm);
    if (norm > 0.0) {
      for (auto& e : row) e.second /= norm;
    }
    m.push_row(row);
  }
  return m;
}

std::vector<std::vector<std::uint32_t>> doc_term_sets(const SparseMatrix& m) {
  std::vector<std::vector<std::uint32_t>> out(m.n_rows());
  for (std::size_t i = 0; i < m.n_rows(); ++i) {
    auto cols = m.row_cols(i);
    auto vals = m.row_values(i);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      if (vals[k] != 0.0) out[i].push_back(cols[k]);
    }
  }
  return out;
}

SparseMatrix incidence_matrix(const EntityCatalog& catalog, EntityType type) {
  const auto& ents = catalog.of(type);
  std::vector<std::vector<SparseMatrix::Entry>> rows(catalog.T());
  for (const auto& e : ents) {
    for (auto doc : e.doc_refs) rows[doc].emplace_back(e.id, 1.0);
  }
  // Entities are visited in id order, so every row is already sorted.
  return SparseMatrix::from_rows(ents.size(), rows);
}

}  // namespace cartomap
