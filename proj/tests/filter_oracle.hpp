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

#ifndef CARTOMAP_TESTS_FILTER_ORACLE_HPP
#define CARTOMAP_TESTS_FILTER_ORACLE_HPP

#include <algorithm>
#include <vector>

#include "facets.hpp"
#include "snapshot.hpp"

namespace cartomap::testing {

// Per-entity predicate evaluation straight from the snapshot fields.
inline bool naive_match(const MapSnapshot& s, std::uint32_t gid, const FilterExpr& expr) {
  const auto [type, local] = s.locate(gid);
  const auto& e = s.of(type)[local];
  for (const auto& [facet, values] : expr.clauses) {
    if (values.empty()) continue;
    bool ok = false;
    if (facet == "type") {
      ok = values.count(std::string(type_name(type))) > 0;
    } else if (facet == "lab") {
      const auto& labs = s.of(EntityType::Lab);
      for (std::size_t l = 0; l < labs.size() && !ok; ++l) {
        if (!values.count(labs[l].label)) continue;
        const auto& rel = s.lab_relations[l];
        if (type == EntityType::Article) ok = std::find(rel.articles.begin(), rel.articles.end(), local) != rel.articles.end();
        if (type == EntityType::Author) ok = std::find(rel.authors.begin(), rel.authors.end(), local) != rel.authors.end();
      }
    } else if (facet == "term") {
      for (auto w : e.terms) ok = ok || values.count(s.of(EntityType::Word)[w].label) > 0;
    } else {
      auto it = e.meta.find(facet);
      ok = it != e.meta.end() && values.count(it->second) > 0;
    }
    if (!ok) return false;
  }
  return true;
}

inline std::vector<std::uint32_t> naive_filter(const MapSnapshot& s, const FilterExpr& expr) {
  std::vector<std::uint32_t> out;
  for (std::uint32_t g = 0; g < s.total(); ++g) {
    if (naive_match(s, g, expr)) out.push_back(g);
  }
  return out;
}

// Up to three clauses over the index's facets with one to three known values
// each; occasionally an empty clause.
inline FilterExpr random_filter(Rng& rng, const FacetIndex& index) {
  FilterExpr expr;
  std::vector<const std::string*> names;
  for (const auto& [name, values] : index.facets) names.push_back(&name);
  const auto n_clauses = rng.index(4);
  for (std::size_t c = 0; c < n_clauses; ++c) {
    const auto& name = *names[rng.index(names.size())];
    const auto& values = index.facets.at(name);
    auto& clause = expr.clauses[name];
    if (rng.uniform() < 0.1 || values.empty()) continue;
    const auto n_values = 1 + rng.index(3);
    for (std::size_t v = 0; v < n_values; ++v) {
      auto it = values.begin();
      std::advance(it, static_cast<std::ptrdiff_t>(rng.index(values.size())));
      clause.insert(it->first);
    }
  }
  return expr;
}

}  // namespace cartomap::testing

#endif  // CARTOMAP_TESTS_FILTER_ORACLE_HPP
