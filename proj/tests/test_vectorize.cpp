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
#include <cmath>

#include "test_util.hpp"
#include "vectorize.hpp"

using namespace cartomap;
using cartomap::testing::TempDir;

namespace {
const std::string B = kBoundary;

TermCounts counts(std::initializer_list<std::pair<const std::string, std::uint32_t>> items) { return TermCounts(items); }
}  // namespace

TEST(Tokenize, PunctuationIsABoundaryStopwordsVanish) {
  StopwordSet stop{"for"};
  EXPECT_EQ(tokenize("Deep Learning, for Networks", stop),
            (std::vector<std::string>{"deep", "learning", B, "networks"}));
}

TEST(Tokenize, EmptyAndAllStopwords) {
  StopwordSet stop{"the"};
  EXPECT_TRUE(tokenize("", stop).empty());
  EXPECT_TRUE(tokenize("the the the", stop).empty());
  EXPECT_TRUE(tokenize("  ,;. !", stop).empty());
}

TEST(Tokenize, BoundariesCollapseAndNumbersSurvive) {
  StopwordSet stop{"of"};
  EXPECT_EQ(tokenize("(2018) Theory... of; graphs", stop),
            (std::vector<std::string>{"2018", B, "theory", B, "graphs"}));
  EXPECT_EQ(tokenize("état de l'art", stopwords("fr")), (std::vector<std::string>{"état", "art"}));
}

TEST(ExtractNgrams, Examples) {
  auto two = extract_ngrams({"a", "b"}, 2);
  std::sort(two.begin(), two.end());
  EXPECT_EQ(two, (std::vector<std::string>{"a", "a b", "b"}));
  auto split = extract_ngrams({"a", B, "b"}, 2);
  std::sort(split.begin(), split.end());
  EXPECT_EQ(split, (std::vector<std::string>{"a", "b"}));
  // sum over n=1..5 of (6 - n + 1)
  std::size_t expected = 0;
  for (std::size_t n = 1; n <= 5; ++n) expected += 6 - n + 1;
  EXPECT_EQ(expected, 20u);
  EXPECT_EQ(extract_ngrams({"a", "b", "c", "d", "e", "f"}, 5).size(), expected);
  EXPECT_THROW(extract_ngrams({"a"}, 0), Error);
}

TEST(ExtractNgrams, NoGramExceedsNmaxOrCrossesBoundary) {
  std::vector<std::string> toks = {"a", "b", "c", B, "d", "e", "f", "g", "h", "i", "j"};
  for (const auto& g : extract_ngrams(toks, 3)) {
    EXPECT_LE(std::count(g.begin(), g.end(), ' '), 2);
    EXPECT_FALSE(g.find("c d") != std::string::npos);
  }
}

TEST(BuildVocab, OccurrenceThreshold) {
  std::vector<TermCounts> docs(30);
  for (std::size_t i = 0; i < 30; ++i) docs[i]["often"] = 1;
  for (std::size_t i = 0; i < 24; ++i) docs[i]["rare"] = 1;
  auto v = build_vocab(docs, 25, 100);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v.terms[0], "often");
  EXPECT_EQ(v.df[0], 30u);
  EXPECT_FALSE(v.find("rare").has_value());
  EXPECT_THROW(build_vocab(docs, 31, 100), Error);
  EXPECT_THROW(build_vocab(std::span<const TermCounts>{}, 1, 10), Error);
}

TEST(BuildVocab, CapKeepsHighestDfSortAndTruncateOracle) {
  std::vector<TermCounts> docs(12);
  std::vector<std::pair<std::string, std::uint32_t>> df_of;
  for (int t = 0; t < 10; ++t) {
    const std::string term = "t" + std::to_string(t);
    const std::uint32_t df = static_cast<std::uint32_t>(1 + (t * 7) % 11);
    for (std::uint32_t i = 0; i < df; ++i) docs[i][term] = 2;
    df_of.emplace_back(term, df);
  }
  auto oracle = df_of;
  std::sort(oracle.begin(), oracle.end(), [](auto& a, auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  oracle.resize(3);
  auto v = build_vocab(docs, 1, 3);
  ASSERT_EQ(v.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(v.terms[i], oracle[i].first);
    EXPECT_EQ(v.df[i], oracle[i].second);
    EXPECT_EQ(v.total_count[i], 2u * oracle[i].second);
  }
}

TEST(Tfidf, HandEvaluatedTwoDocCorpus) {
  std::vector<TermCounts> docs = {counts({{"a", 1}, {"b", 1}}), counts({{"a", 1}})};
  auto v = build_vocab(docs, 1, 10);
  ASSERT_EQ(v.terms, (std::vector<std::string>{"a", "b"}));
  auto m = tfidf_matrix(docs, v);
  const double ia = std::log(3.0 / 3.0) + 1.0;
  const double ib = std::log(3.0 / 2.0) + 1.0;
  const double n1 = std::sqrt(ia * ia + ib * ib);
  EXPECT_NEAR(m.at(0, 0), ia / n1, 1e-15);
  EXPECT_NEAR(m.at(0, 1), ib / n1, 1e-15);
  EXPECT_NEAR(m.at(1, 0), 1.0, 1e-15);
  EXPECT_EQ(m.at(1, 1), 0.0);
  EXPECT_EQ(m.nnz(), 3u);
}

TEST(Tfidf, OutOfVocabularyDocKeepsZeroRow) {
  std::vector<TermCounts> docs = {counts({{"a", 3}}), counts({{"zzz", 1}}), counts({{"a", 1}})};
  auto v = build_vocab(docs, 2, 10);
  auto m = tfidf_matrix(docs, v);
  ASSERT_EQ(m.n_rows(), 3u);
  EXPECT_TRUE(m.row_cols(1).empty());
}

TEST(Tfidf, InvariantsOnSyntheticCorpus) {
  auto s = synth_corpus(3, 60, 30, 20, 4);
  std::vector<TermCounts> docs;
  for (const auto& r : s.records) docs.push_back(analyze_record(r, stopwords("en"), 5));
  auto v = build_vocab(docs, 10, 64000);
  auto m = tfidf_matrix(docs, v);
  std::size_t pairs = 0;
  for (const auto& d : docs) {
    for (const auto& [term, c] : d) pairs += (c > 0 && v.find(term)) ? 1 : 0;
  }
  EXPECT_EQ(m.nnz(), pairs);
  for (std::size_t i = 0; i < m.n_rows(); ++i) {
    double norm = 0.0;
    for (double x : m.row_values(i)) {
      EXPECT_GE(x, 0.0);
      norm += x * x;
    }
    EXPECT_TRUE(std::abs(std::sqrt(norm) - 1.0) < 1e-12 || norm == 0.0);
  }
  // Deterministic.
  auto m2 = tfidf_matrix(docs, build_vocab(docs, 10, 64000));
  EXPECT_EQ(m, m2);
  // The noise words and filler stopwords never appear as bigrams above threshold.
  for (const auto& t : v.terms) EXPECT_EQ(t.find("the"), std::string::npos);
}

TEST(Tfidf, TermBelowThresholdDoesNotContaminateRetainedColumns) {
  auto s = synth_corpus(2, 40, 20, 10, 9);
  std::vector<TermCounts> docs;
  for (const auto& r : s.records) docs.push_back(analyze_record(r, stopwords("en"), 2));
  auto v = build_vocab(docs, 15, 64000);
  auto base = tfidf_matrix(docs, v);
  auto docs2 = docs;
  docs2[3]["neverseenbefore"] = 2;
  docs2[7]["neverseenbefore"] = 1;
  auto v2 = build_vocab(docs2, 15, 64000);
  EXPECT_EQ(v2.terms, v.terms);
  EXPECT_EQ(tfidf_matrix(docs2, v2), base);
}

TEST(Vocabulary, TsvRoundTrip) {
  TempDir dir;
  std::vector<TermCounts> docs = {counts({{"a b", 2}, {"c", 1}}), counts({{"a b", 1}})};
  auto v = build_vocab(docs, 1, 10, 3);
  v.save_tsv(dir / "v.tsv");
  auto back = Vocabulary::load_tsv(dir / "v.tsv");
  EXPECT_EQ(back.terms, v.terms);
  EXPECT_EQ(back.df, v.df);
  EXPECT_EQ(back.total_count, v.total_count);
  EXPECT_EQ(back.n_max, 3u);
  EXPECT_EQ(back.find("a b"), 0u);
}

TEST(Incidence, ColumnsRowsAndDegenerateShape) {
  std::vector<CorpusRecord> recs(3);
  for (int i = 0; i < 3; ++i) {
    recs[i].doc_id = std::to_string(i);
    recs[i].title = "x";
  }
  recs[0].authors = {"K", "Z"};
  recs[2].authors = {"K"};
  auto cat = build_catalog(recs, 1);
  auto m = incidence_matrix(cat, EntityType::Author);
  ASSERT_EQ(m.n_cols(), 2u);
  const auto k = cat.authors[0].label == "K" ? 0u : 1u;
  EXPECT_EQ(m.at(0, k), 1.0);
  EXPECT_EQ(m.at(1, k), 0.0);
  EXPECT_EQ(m.at(2, k), 1.0);
  // Row sums equal the per-record author counts after filtering.
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(m.row_cols(i).size(), recs[i].authors.size());

  auto none = incidence_matrix(build_catalog(recs, 5), EntityType::Lab);
  EXPECT_EQ(none.n_cols(), 0u);
  EXPECT_EQ(none.nnz(), 0u);
  EXPECT_EQ(none.n_rows(), 3u);
}
