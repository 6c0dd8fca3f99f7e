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

#include "corpus.hpp"

#include <algorithm>
#include <charconv>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace cartomap {

namespace {

struct CsvRow {
  std::vector<std::string> fields;
  std::size_t line = 0;  // 1-based line where the row starts
  bool unterminated = false;
};

// RFC 4180 reader: comma separated, double-quote escaping, quoted fields may
// span lines.
class CsvReader {
 public:
  explicit CsvReader(std::istream& in) : in_(in) {}

  bool next(CsvRow& row) {
    row.fields.clear();
    row.unterminated = false;
    int c = in_.get();
    if (c == EOF) return false;
    row.line = line_;
    std::string field;
    bool quoted = false;
    bool field_started_quoted = false;
    while (true) {
      if (c == EOF) {
        if (quoted) row.unterminated = true;
        row.fields.push_back(std::move(field));
        return true;
      }
      const char ch = static_cast<char>(c);
      if (quoted) {
        if (ch == '"') {
          if (in_.peek() == '"') {
            in_.get();
            field.push_back('"');
          } else {
            quoted = false;
          }
        } else {
          if (ch == '\n') ++line_;
          field.push_back(ch);
        }
      } else if (ch == '"' && field.empty() && !field_started_quoted) {
        quoted = true;
        field_started_quoted = true;
      } else if (ch == ',') {
        row.fields.push_back(std::move(field));
        field.clear();
        field_started_quoted = false;
      } else if (ch == '\n' || ch == '\r') {
        if (ch == '\r' && in_.peek() == '\n') in_.get();
        ++line_;
        row.fields.push_back(std::move(field));
        return true;
      } else {
        field.push_back(ch);
      }
      c = in_.get();
    }
  }

 private:
  std::istream& in_;
  std::size_t line_ = 1;
};

std::vector<std::string> split_multi(std::string_view cell) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  std::size_t start = 0;
  while (start <= cell.size()) {
    std::size_t end = cell.find(';', start);
    if (end == std::string_view::npos) end = cell.size();
    std::string item = trim(cell.substr(start, end - start));
    if (!item.empty() && seen.insert(item).second) out.push_back(std::move(item));
    start = end + 1;
  }
  return out;
}

std::string quote_csv(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string join_multi(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out.push_back(';');
    out += items[i];
  }
  return out;
}

}  // namespace

WarningSink stderr_warnings() {
  return [](const std::string& msg) { std::cerr << "warning: " << msg << "\n"; };
}

void for_each_record(const std::filesystem::path& path, const ColumnMapping& mapping,
                     const std::function<void(CorpusRecord&&)>& fn, const WarningSink& warn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::NotFound, "corpus file not found: " + path.string());
  CsvReader reader(in);
  CsvRow header;
  if (!reader.next(header)) fail(ErrorCode::InvalidArgument, "corpus file is empty: " + path.string());
  if (!header.fields.empty() && header.fields[0].starts_with("\xEF\xBB\xBF")) {
    header.fields[0].erase(0, 3);
  }
  std::unordered_map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.fields.size(); ++i) column.emplace(trim(header.fields[i]), i);

  auto find = [&](const std::string& name, bool mandatory) -> std::optional<std::size_t> {
    auto it = column.find(name);
    if (it != column.end()) return it->second;
    if (mandatory) fail(ErrorCode::InvalidArgument, "missing mandatory column '" + name + "'");
    return std::nullopt;
  };
  const auto c_id = *find(mapping.doc_id, true);
  const auto c_title = *find(mapping.title, true);
  const auto c_abstract = find(mapping.abstract, false);
  const auto c_keywords = find(mapping.keywords, false);
  const auto c_year = find(mapping.year, false);
  const auto c_domain = find(mapping.domain, false);
  const auto c_authors = find(mapping.authors, false);
  const auto c_labs = find(mapping.labs, false);
  const auto c_views = find(mapping.views, false);

  std::unordered_map<std::string, std::size_t> seen_ids;
  CsvRow row;
  while (reader.next(row)) {
    const std::string where = path.filename().string() + ":" + std::to_string(row.line);
    if (row.fields.size() == 1 && trim(row.fields[0]).empty()) continue;  // blank line
    if (row.unterminated) {
      warn(where + ": unterminated quoted field, row skipped");
      continue;
    }
    if (row.fields.size() != header.fields.size()) {
      warn(where + ": expected " + std::to_string(header.fields.size()) + " fields, got " +
           std::to_string(row.fields.size()) + ", row skipped");
      continue;
    }
    auto cell = [&](const std::optional<std::size_t>& c) -> std::string {
      return c ? trim(row.fields[*c]) : std::string();
    };
    CorpusRecord rec;
    rec.doc_id = cell(c_id);
    if (rec.doc_id.empty()) {
      warn(where + ": empty doc_id, row skipped");
      continue;
    }
    if (auto [it, inserted] = seen_ids.emplace(rec.doc_id, row.line); !inserted) {
      fail(ErrorCode::InvalidArgument, "duplicate doc_id \"" + rec.doc_id + "\" at line " +
                                           std::to_string(row.line) + " (first seen at line " +
                                           std::to_string(it->second) + ")");
    }
    rec.title = cell(c_title);
    rec.abstract = cell(c_abstract);
    rec.keywords = split_multi(cell(c_keywords));
    rec.authors = split_multi(cell(c_authors));
    rec.labs = split_multi(cell(c_labs));
    if (auto d = cell(c_domain); !d.empty()) rec.domain_tag = d;
    if (auto y = cell(c_year); !y.empty()) {
      int year = 0;
      auto [p, ec] = std::from_chars(y.data(), y.data() + y.size(), year);
      if (ec != std::errc() || p != y.data() + y.size() || year < 1900 || year > 2100) {
        warn(where + ": invalid year '" + y + "', treated as absent");
      } else {
        rec.pub_year = year;
      }
    }
    if (auto v = cell(c_views); !v.empty()) {
      double views = 0.0;
      auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), views);
      if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(views) || views < 0.0) {
        warn(where + ": invalid views '" + v + "', treated as absent");
      } else {
        rec.views_per_year = views;
      }
    }
    if (rec.title.empty() && rec.abstract.empty() && rec.keywords.empty()) {
      warn(where + ": record \"" + rec.doc_id + "\" has no title, abstract or keywords, dropped");
      continue;
    }
    fn(std::move(rec));
  }
}

std::vector<CorpusRecord> load_corpus(const std::filesystem::path& path, const ColumnMapping& mapping,
                                      const WarningSink& warn) {
  std::vector<CorpusRecord> out;
  for_each_record(path, mapping, [&](CorpusRecord&& r) { out.push_back(std::move(r)); }, warn);
  return out;
}

void write_corpus_csv(const std::filesystem::path& path, const std::vector<CorpusRecord>& records) {
  std::ostringstream ss;
  ss << "id,title,abstract,keywords,year,domain,authors,labs,views\n";
  for (const auto& r : records) {
    ss << quote_csv(r.doc_id) << ',' << quote_csv(r.title) << ',' << quote_csv(r.abstract) << ','
       << quote_csv(join_multi(r.keywords)) << ',';
    if (r.pub_year) ss << *r.pub_year;
    ss << ',' << quote_csv(r.domain_tag.value_or("")) << ',' << quote_csv(join_multi(r.authors)) << ','
       << quote_csv(join_multi(r.labs)) << ',';
    if (r.views_per_year) {
      char buf[64];
      auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), *r.views_per_year);
      ss << std::string_view(buf, static_cast<std::size_t>(p - buf));
    }
    ss << '\n';
  }
  write_text_file(path, ss.str());
}

const std::vector<CatalogEntity>& EntityCatalog::of(EntityType t) const {
  switch (t) {
    case EntityType::Article: return articles;
    case EntityType::Author: return authors;
    case EntityType::Lab: return labs;
    case EntityType::Word: break;
  }
  fail(ErrorCode::InvalidArgument, "the catalog holds no word entities");
}

EntityCatalog build_catalog(const std::vector<CorpusRecord>& records, std::uint32_t min_docs) {
  require(!records.empty(), "build_catalog: empty record sequence");
  EntityCatalog cat;
  cat.min_docs = min_docs;
  cat.articles.reserve(records.size());
  std::map<std::string, std::vector<std::uint32_t>> authors;
  std::map<std::string, std::vector<std::uint32_t>> labs;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto id = static_cast<std::uint32_t>(i);
    const auto& r = records[i];
    cat.articles.push_back({id, EntityType::Article, r.title.empty() ? r.doc_id : r.title, {id}});
    for (const auto& a : r.authors) {
      auto& refs = authors[trim(a)];
      if (refs.empty() || refs.back() != id) refs.push_back(id);
    }
    for (const auto& l : r.labs) {
      auto& refs = labs[trim(l)];
      if (refs.empty() || refs.back() != id) refs.push_back(id);
    }
  }
  auto emit = [&](const std::map<std::string, std::vector<std::uint32_t>>& src, EntityType type,
                  std::vector<CatalogEntity>& dst) {
    for (const auto& [name, refs] : src) {
      if (name.empty() || refs.size() < min_docs) continue;
      dst.push_back({static_cast<std::uint32_t>(dst.size()), type, name, refs});
    }
  };
  emit(authors, EntityType::Author, cat.authors);
  emit(labs, EntityType::Lab, cat.labs);
  return cat;
}

namespace {

std::vector<std::string> make_words(Rng& rng, std::size_t n, std::set<std::string>& used) {
  static constexpr std::string_view kConsonants = "bdfgklmnprstvz";
  static constexpr std::string_view kVowels = "aeiou";
  std::vector<std::string> out;
  out.reserve(n);
  while (out.size() < n) {
    std::string w;
    const std::size_t syllables = 3 + rng.index(2);
    for (std::size_t s = 0; s < syllables; ++s) {
      w.push_back(kConsonants[rng.index(kConsonants.size())]);
      w.push_back(kVowels[rng.index(kVowels.size())]);
    }
    if (used.insert(w).second) out.push_back(std::move(w));
  }
  return out;
}

std::string capitalize(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

}  // namespace

SyntheticCorpus synth_corpus(std::uint32_t n_topics, std::uint32_t docs_per_topic, std::uint32_t topic_vocab,
                             std::uint32_t shared_vocab, std::uint64_t seed) {
  require(n_topics >= 1 && docs_per_topic >= 1 && topic_vocab >= 1,
          "synth_corpus: topic, document and vocabulary counts must be >= 1");
  Rng rng(seed);
  SyntheticCorpus out;
  std::set<std::string> used;
  for (std::uint32_t t = 0; t < n_topics; ++t) out.topic_words.push_back(make_words(rng, topic_vocab, used));
  out.shared_words = make_words(rng, shared_vocab, used);

  const std::size_t authors_per_topic = std::max<std::size_t>(6, docs_per_topic / 20);
  std::vector<std::vector<std::string>> topic_authors(n_topics);
  std::vector<std::vector<std::string>> topic_labs(n_topics);
  std::set<std::string> name_pool;
  std::vector<std::string> names = make_words(rng, n_topics * authors_per_topic * 2, name_pool);
  std::size_t next_name = 0;
  for (std::uint32_t t = 0; t < n_topics; ++t) {
    for (std::size_t a = 0; a < authors_per_topic; ++a) {
      topic_authors[t].push_back(capitalize(names[next_name]) + " " + capitalize(names[next_name + 1]));
      next_name += 2;
    }
    for (std::size_t l = 0; l < 3; ++l) {
      topic_labs[t].push_back("Lab " + capitalize(names[(t * 3 + l) % names.size()]) + " " +
                              std::to_string(t * 3 + l));
    }
  }

  static constexpr std::array<std::string_view, 6> kFiller = {"the", "of", "and", "in", "for", "with"};
  const double p_shared = shared_vocab > 0 ? 0.2 : 0.0;
  auto sample_word = [&](std::uint32_t topic) -> std::string {
    const double u = rng.uniform();
    if (u < 0.1) return std::string(kFiller[rng.index(kFiller.size())]);
    if (u < 0.1 + p_shared) return out.shared_words[rng.index(out.shared_words.size())];
    const auto& tw = out.topic_words[topic];
    return tw[rng.index(tw.size())];
  };
  auto sentence = [&](std::uint32_t topic, std::size_t len) {
    std::string s;
    for (std::size_t i = 0; i < len; ++i) {
      if (i) s.push_back(' ');
      s += sample_word(topic);
    }
    return s;
  };

  std::vector<std::pair<std::uint32_t, CorpusRecord>> docs;
  docs.reserve(static_cast<std::size_t>(n_topics) * docs_per_topic);
  for (std::uint32_t t = 0; t < n_topics; ++t) {
    for (std::uint32_t d = 0; d < docs_per_topic; ++d) {
      CorpusRecord r;
      r.title = capitalize(sentence(t, 6));
      for (int s = 0; s < 4; ++s) {
        if (s) r.abstract += " ";
        r.abstract += capitalize(sentence(t, 12)) + ".";
      }
      for (int k = 0; k < 3; ++k) {
        const auto& tw = out.topic_words[t];
        r.keywords.push_back(tw[rng.index(tw.size())]);
      }
      std::sort(r.keywords.begin(), r.keywords.end());
      r.keywords.erase(std::unique(r.keywords.begin(), r.keywords.end()), r.keywords.end());
      const std::size_t n_auth = 1 + rng.index(3);
      std::set<std::size_t> picks;
      while (picks.size() < n_auth) picks.insert(rng.index(topic_authors[t].size()));
      for (auto p : picks) r.authors.push_back(topic_authors[t][p]);
      r.labs.push_back(topic_labs[t][rng.index(topic_labs[t].size())]);
      if (n_topics > 1 && rng.uniform() < 0.1) {
        const auto other = static_cast<std::uint32_t>((t + 1 + rng.index(n_topics - 1)) % n_topics);
        r.labs.push_back(topic_labs[other][rng.index(topic_labs[other].size())]);
      }
      r.pub_year = 2008 + static_cast<int>(rng.index(13));
      r.domain_tag = "topic" + std::to_string(t);
      if (rng.uniform() < 0.8) r.views_per_year = std::round(rng.uniform() * 500.0) / 10.0;
      docs.emplace_back(t, std::move(r));
    }
  }
  rng.shuffle(docs);
  out.records.reserve(docs.size());
  out.topic_of.reserve(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "D%06zu", i + 1);
    docs[i].second.doc_id = id;
    out.topic_of.push_back(docs[i].first);
    out.records.push_back(std::move(docs[i].second));
  }
  return out;
}

}  // namespace cartomap
