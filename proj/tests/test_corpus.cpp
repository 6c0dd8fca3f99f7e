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
#include <map>
#include <set>

#include "corpus.hpp"
#include "test_util.hpp"

using namespace cartomap;
using cartomap::testing::TempDir;

namespace {

std::vector<std::string> collect_warnings(const std::filesystem::path& p, std::vector<CorpusRecord>* out = nullptr) {
  std::vector<std::string> warnings;
  auto recs = load_corpus(p, ColumnMapping{}, [&](const std::string& w) { warnings.push_back(w); });
  if (out) *out = std::move(recs);
  return warnings;
}

CorpusRecord rec(std::string id, std::vector<std::string> authors, std::vector<std::string> labs = {}) {
  CorpusRecord r;
  r.doc_id = std::move(id);
  r.title = "title " + r.doc_id;
  r.authors = std::move(authors);
  r.labs = std::move(labs);
  return r;
}

}  // namespace

TEST(LoadCorpus, ThreeRowsInOrder) {
  TempDir dir;
  write_text_file(dir / "c.csv", "id,title,abstract\n1,First,aaa\n2,Second,bbb\n3,Third,ccc\n");
  auto recs = load_corpus(dir / "c.csv", ColumnMapping{});
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_EQ(recs[0].doc_id, "1");
  EXPECT_EQ(recs[1].title, "Second");
  EXPECT_EQ(recs[2].abstract, "ccc");
  EXPECT_FALSE(recs[0].pub_year.has_value());
  EXPECT_TRUE(recs[0].authors.empty());
}

TEST(LoadCorpus, EmptyAuthorsCellGivesEmptyList) {
  TempDir dir;
  write_text_file(dir / "c.csv", "id,title,authors\nA,Title,\nB,Other,\"Doe, J; Roe, K ; Doe, J\"\n");
  auto recs = load_corpus(dir / "c.csv", ColumnMapping{});
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_TRUE(recs[0].authors.empty());
  EXPECT_EQ(recs[1].authors, (std::vector<std::string>{"Doe, J", "Roe, K"}));
}

TEST(LoadCorpus, DuplicateDocIdNamesIdAndLine) {
  TempDir dir;
  write_text_file(dir / "c.csv", "id,title\nA,one\nB,two\nA,three\n");
  try {
    load_corpus(dir / "c.csv", ColumnMapping{});
    FAIL() << "expected duplicate doc_id error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidArgument);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("\"A\""), std::string::npos) << msg;
    EXPECT_NE(msg.find("line 4"), std::string::npos) << msg;
  }
}

TEST(LoadCorpus, MissingFileAndMandatoryColumn) {
  TempDir dir;
  EXPECT_THROW(load_corpus(dir / "nope.csv", ColumnMapping{}), Error);
  write_text_file(dir / "c.csv", "id,abstract\n1,x\n");
  try {
    load_corpus(dir / "c.csv", ColumnMapping{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("title"), std::string::npos);
  }
}

TEST(LoadCorpus, MalformedRowsReportedWithLineNumbers) {
  TempDir dir;
  write_text_file(dir / "c.csv",
                  "id,title,abstract,year\n"
                  "1,ok,\"multi\nline abstract\",2001\n"
                  "2,too,many,fields,here\n"
                  "3,bad year,x,1200\n"
                  "4,,,\n"
                  "5,fine,y,2018\n");
  std::vector<CorpusRecord> recs;
  auto warnings = collect_warnings(dir / "c.csv", &recs);
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_EQ(recs[0].abstract, "multi\nline abstract");
  EXPECT_EQ(recs[0].pub_year, 2001);
  EXPECT_FALSE(recs[1].pub_year.has_value());
  EXPECT_EQ(recs[2].doc_id, "5");
  ASSERT_EQ(warnings.size(), 3u);
  EXPECT_NE(warnings[0].find(":4:"), std::string::npos) << warnings[0];  // after the two-line row
  EXPECT_NE(warnings[1].find(":5:"), std::string::npos) << warnings[1];
  EXPECT_NE(warnings[2].find(":6:"), std::string::npos) << warnings[2];
}

TEST(LoadCorpus, CustomMappingAndOptionalFields) {
  TempDir dir;
  write_text_file(dir / "c.csv", "docid,name,kw,views\nx1,Hello,a;b;a,12.5\n");
  ColumnMapping m;
  m.doc_id = "docid";
  m.title = "name";
  m.keywords = "kw";
  auto recs = load_corpus(dir / "c.csv", m);
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].keywords, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(recs[0].views_per_year, 12.5);
  EXPECT_FALSE(recs[0].domain_tag.has_value());
}

TEST(LoadCorpus, WriteThenLoadRoundTrip) {
  TempDir dir;
  auto synth = synth_corpus(2, 20, 10, 5, 3);
  write_corpus_csv(dir / "s.csv", synth.records);
  auto back = load_corpus(dir / "s.csv", ColumnMapping{});
  EXPECT_EQ(back, synth.records);
}

TEST(BuildCatalog, MinDocsThreshold) {
  std::vector<CorpusRecord> recs = {rec("1", {"Ann", "Bob"}), rec("2", {"Ann", "Bob"}), rec("3", {"Ann"})};
  auto cat = build_catalog(recs, 3);
  ASSERT_EQ(cat.authors.size(), 1u);
  EXPECT_EQ(cat.authors[0].label, "Ann");
  EXPECT_EQ(cat.authors[0].doc_refs, (std::vector<std::uint32_t>{0, 1, 2}));
  EXPECT_EQ(cat.T(), 3u);
  for (std::uint32_t i = 0; i < 3; ++i) EXPECT_EQ(cat.articles[i].id, i);
}

TEST(BuildCatalog, DistinctSingleAuthorsWithMinOne) {
  std::vector<CorpusRecord> recs;
  for (int i = 0; i < 5; ++i) recs.push_back(rec(std::to_string(i), {"Author " + std::to_string(i)}));
  auto cat = build_catalog(recs, 1);
  ASSERT_EQ(cat.authors.size(), 5u);
  for (std::uint32_t k = 0; k < 5; ++k) {
    EXPECT_EQ(cat.authors[k].id, k);
    EXPECT_EQ(cat.authors[k].doc_refs.size(), 1u);
  }
  EXPECT_THROW(build_catalog({}, 3), Error);
}

TEST(BuildCatalog, DocRefsMatchRecordsAndArePermutationStable) {
  auto synth = synth_corpus(3, 40, 20, 10, 11);
  auto cat = build_catalog(synth.records, 3);
  EXPECT_EQ(cat.T(), synth.records.size());
  for (const auto* group : {&cat.authors, &cat.labs}) {
    for (const auto& e : *group) {
      EXPECT_GE(e.doc_refs.size(), 3u);
      std::size_t count = 0;
      for (const auto& r : synth.records) {
        const auto& names = group == &cat.authors ? r.authors : r.labs;
        count += std::count(names.begin(), names.end(), e.label);
      }
      EXPECT_EQ(e.doc_refs.size(), count) << e.label;
      for (auto d : e.doc_refs) EXPECT_LT(d, cat.T());
    }
  }
  // Permute records; the per-name doc_ref sets must map through the permutation.
  std::vector<std::size_t> perm(synth.records.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  Rng rng(5);
  rng.shuffle(perm);
  std::vector<CorpusRecord> permuted;
  for (auto p : perm) permuted.push_back(synth.records[p]);
  auto cat2 = build_catalog(permuted, 3);
  ASSERT_EQ(cat2.authors.size(), cat.authors.size());
  for (std::size_t k = 0; k < cat.authors.size(); ++k) {
    EXPECT_EQ(cat2.authors[k].label, cat.authors[k].label);
    std::set<std::uint32_t> mapped;
    for (auto d : cat2.authors[k].doc_refs) mapped.insert(static_cast<std::uint32_t>(perm[d]));
    EXPECT_EQ(mapped, std::set<std::uint32_t>(cat.authors[k].doc_refs.begin(), cat.authors[k].doc_refs.end()));
  }
}

TEST(SynthCorpus, CountsAndGroundTruth) {
  auto s = synth_corpus(3, 500, 50, 100, 7);
  EXPECT_EQ(s.records.size(), 1500u);
  ASSERT_EQ(s.topic_of.size(), 1500u);
  std::map<std::uint32_t, int> per_topic;
  for (auto t : s.topic_of) ++per_topic[t];
  EXPECT_EQ(per_topic.size(), 3u);
  for (auto& [t, n] : per_topic) EXPECT_EQ(n, 500);
  std::set<std::string> ids;
  for (const auto& r : s.records) ids.insert(r.doc_id);
  EXPECT_EQ(ids.size(), 1500u);
}

TEST(SynthCorpus, DeterministicGivenSeed) {
  auto a = synth_corpus(3, 50, 20, 10, 7);
  auto b = synth_corpus(3, 50, 20, 10, 7);
  EXPECT_EQ(a.records, b.records);
  EXPECT_EQ(a.topic_of, b.topic_of);
  auto c = synth_corpus(3, 50, 20, 10, 8);
  EXPECT_NE(a.records, c.records);
}

TEST(SynthCorpus, TopicVocabulariesDisjoint) {
  auto s = synth_corpus(2, 10, 5, 0, 1);
  ASSERT_EQ(s.topic_words.size(), 2u);
  std::set<std::string> a(s.topic_words[0].begin(), s.topic_words[0].end());
  std::set<std::string> b(s.topic_words[1].begin(), s.topic_words[1].end());
  EXPECT_EQ(a.size(), 5u);
  EXPECT_EQ(b.size(), 5u);
  std::vector<std::string> common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
  EXPECT_TRUE(common.empty());
  EXPECT_TRUE(s.shared_words.empty());
  EXPECT_THROW(synth_corpus(0, 1, 1, 0, 1), Error);
}
