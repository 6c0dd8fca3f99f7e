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

#ifndef CARTOMAP_CORPUS_HPP
#define CARTOMAP_CORPUS_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "common.hpp"

namespace cartomap {

struct CorpusRecord {
  std::string doc_id;
  std::string title;
  std::string abstract;
  std::vector<std::string> keywords;
  std::optional<int> pub_year;
  std::optional<std::string> domain_tag;
  std::vector<std::string> authors;
  std::vector<std::string> labs;
  std::optional<double> views_per_year;

  friend bool operator==(const CorpusRecord&, const CorpusRecord&) = default;
};

// Source column names. Only doc_id and title must exist in the file; any
// other column that is absent from the header leaves its field empty.
struct ColumnMapping {
  std::string doc_id = "id";
  std::string title = "title";
  std::string abstract = "abstract";
  std::string keywords = "keywords";
  std::string year = "year";
  std::string domain = "domain";
  std::string authors = "authors";
  std::string labs = "labs";
  std::string views = "views";
};

using WarningSink = std::function<void(const std::string&)>;

// Prints to stderr.
WarningSink stderr_warnings();

// Streams records in file order. Malformed rows are reported to `warn` with
// their starting line number and skipped; a duplicate doc_id is fatal.
void for_each_record(const std::filesystem::path& path, const ColumnMapping& mapping,
                     const std::function<void(CorpusRecord&&)>& fn,
                     const WarningSink& warn = stderr_warnings());

std::vector<CorpusRecord> load_corpus(const std::filesystem::path& path,
                                      const ColumnMapping& mapping,
                                      const WarningSink& warn = stderr_warnings());

// Writes records in the dialect load_corpus reads, with the default mapping.
void write_corpus_csv(const std::filesystem::path& path, const std::vector<CorpusRecord>& records);

struct CatalogEntity {
  std::uint32_t id = 0;
  EntityType type = EntityType::Article;
  std::string label;
  std::vector<std::uint32_t> doc_refs;  // sorted article ids
};

// Articles, authors and laboratories. Words come from the vocabulary.
struct EntityCatalog {
  std::vector<CatalogEntity> articles;
  std::vector<CatalogEntity> authors;
  std::vector<CatalogEntity> labs;
  std::uint32_t min_docs = 3;

  std::size_t T() const { return articles.size(); }
  const std::vector<CatalogEntity>& of(EntityType t) const;
};

// Author and lab entities are kept iff they appear on at least `min_docs`
// articles; they are numbered in label order so the catalog does not depend
// on record order.
EntityCatalog build_catalog(const std::vector<CorpusRecord>& records, std::uint32_t min_docs = 3);

struct SyntheticCorpus {
  std::vector<CorpusRecord> records;
  std::vector<std::uint32_t> topic_of;               // ground truth per record
  std::vector<std::vector<std::string>> topic_words;  // disjoint per topic
  std::vector<std::string> shared_words;
};

SyntheticCorpus synth_corpus(std::uint32_t n_topics, std::uint32_t docs_per_topic,
                             std::uint32_t topic_vocab, std::uint32_t shared_vocab,
                             std::uint64_t seed);

}  // namespace cartomap

#endif  // CARTOMAP_CORPUS_HPP
