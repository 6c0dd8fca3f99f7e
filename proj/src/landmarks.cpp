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

#include "landmarks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace cartomap {

namespace {

constexpr std::size_t kMaxIterations = 300;
constexpr double kShiftTolerance = 1e-6;
constexpr std::size_t kAdjacentNearest = 3;

double sq(const Point2& a, const Point2& b) {
  const double dx = a.x - b.x, dy = a.y - b.y;
  return dx * dx + dy * dy;
}

}  // namespace

std::vector<std::uint32_t> assign_nearest(std::span<const Point2> centroids, std::span<const Point2> points) {
  require(!centroids.empty(), "assign: no centroids");
  std::vector<std::uint32_t> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    std::uint32_t best = 0;
    double best_d = sq(points[i], centroids[0]);
    for (std::size_t c = 1; c < centroids.size(); ++c) {
      const double d = sq(points[i], centroids[c]);
      if (d < best_d) {
        best_d = d;
        best = static_cast<std::uint32_t>(c);
      }
    }
    out[i] = best;
  }
  return out;
}

KMeansResult kmeans(std::span<const Point2> points, std::size_t k, std::uint64_t seed) {
  const std::size_t n = points.size();
  require(k >= 1, "kmeans: k must be >= 1");
  require(k <= n, "kmeans: k = " + std::to_string(k) + " exceeds the number of points (" + std::to_string(n) + ")");
  Rng rng(seed);
  KMeansResult r;
  r.centroids.reserve(k);

  // k-means++ seeding.
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::vector<bool> chosen(n, false);
  std::size_t first = rng.index(n);
  r.centroids.push_back(points[first]);
  chosen[first] = true;
  while (r.centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], sq(points[i], r.centroids.back()));
      total += d2[i];
    }
    std::size_t pick = n;
    if (total > 0.0) {
      double u = rng.uniform() * total;
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        pick = i;
        u -= d2[i];
        if (u < 0.0) break;
      }
    }
    if (pick == n) {
      // Every point coincides with a centroid: take an unused index.
      std::vector<std::size_t> free;
      for (std::size_t i = 0; i < n; ++i) {
        if (!chosen[i]) free.push_back(i);
      }
      pick = free[rng.index(free.size())];
    }
    chosen[pick] = true;
    r.centroids.push_back(points[pick]);
  }

  // Lloyd iterations.
  for (r.iterations = 1; r.iterations <= kMaxIterations; ++r.iterations) {
    r.assignment = assign_nearest(r.centroids, points);
    std::vector<double> sx(k, 0.0), sy(k, 0.0);
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sx[r.assignment[i]] += points[i].x;
      sy[r.assignment[i]] += points[i].y;
      ++count[r.assignment[i]];
    }
    double shift = 0.0;
    std::vector<bool> taken(n, false);
    for (std::size_t c = 0; c < k; ++c) {
      Point2 next;
      if (count[c] > 0) {
        next = {sx[c] / static_cast<double>(count[c]), sy[c] / static_cast<double>(count[c])};
      } else {
        // Reseed on the point farthest from its own centroid.
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double d = sq(points[i], r.centroids[r.assignment[i]]);
          if (!taken[i] && d > far_d) {
            far_d = d;
            far = i;
          }
        }
        taken[far] = true;
        next = points[far];
      }
      shift = std::max(shift, std::sqrt(sq(next, r.centroids[c])));
      r.centroids[c] = next;
    }
    if (shift < kShiftTolerance) break;
  }
  r.iterations = std::min(r.iterations, kMaxIterations);
  r.assignment = assign_nearest(r.centroids, points);
  for (std::size_t i = 0; i < n; ++i) r.inertia += sq(points[i], r.centroids[r.assignment[i]]);
  return r;
}

std::vector<std::vector<std::uint32_t>> adjacent_clusters(std::span<const Point2> centroids) {
  const std::size_t k = centroids.size();
  std::vector<std::set<std::uint32_t>> near(k);
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<std::pair<double, std::uint32_t>> others;
    for (std::size_t o = 0; o < k; ++o) {
      if (o != c) others.emplace_back(sq(centroids[c], centroids[o]), static_cast<std::uint32_t>(o));
    }
    std::sort(others.begin(), others.end());
    for (std::size_t j = 0; j < std::min(kAdjacentNearest, others.size()); ++j) near[c].insert(others[j].second);
  }
  std::vector<std::vector<std::uint32_t>> adj(k);
  for (std::size_t c = 0; c < k; ++c) {
    for (auto o : near[c]) {
      if (near[o].count(static_cast<std::uint32_t>(c))) adj[c].push_back(o);
    }
  }
  return adj;
}

std::vector<std::uint32_t> document_frequency(std::span<const std::vector<std::uint32_t>> doc_terms, std::size_t n_terms) {
  std::vector<std::uint32_t> df(n_terms, 0);
  for (const auto& terms : doc_terms) {
    for (auto t : terms) {
      require(t < n_terms, "naming: term id out of range");
      ++df[t];
    }
  }
  return df;
}

namespace {

struct Scored {
  double score;
  std::uint32_t df;
  std::uint32_t term;
};

// Orders candidates by score, then higher df, then term text.
std::vector<std::uint32_t> rank_terms(const std::vector<std::uint32_t>& pool, const std::vector<std::uint32_t>& inside,
                                      double n_inside, const std::vector<std::uint32_t>& df, double n_docs,
                                      std::span<const std::string> terms) {
  std::vector<Scored> s;
  s.reserve(pool.size());
  for (auto t : pool) {
    const double i = n_inside > 0.0 ? inside[t] / n_inside : 0.0;
    s.push_back({i - df[t] / n_docs, df[t], t});
  }
  std::sort(s.begin(), s.end(), [&](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.df != b.df) return a.df > b.df;
    return terms[a.term] < terms[b.term];
  });
  std::vector<std::uint32_t> out;
  out.reserve(s.size());
  for (const auto& x : s) out.push_back(x.term);
  return out;
}

}  // namespace

std::vector<ClusterName> name_clusters(const NamingInput& in) {
  const std::size_t n_terms = in.terms.size();
  const std::size_t T = in.doc_terms.size();
  require(n_terms > 0, "naming: corpus has no retained words");
  require(T > 0, "naming: no articles");
  require(in.article_assignment.size() == T, "naming: article assignment size differs from corpus");
  require(in.word_assignment.size() == n_terms, "naming: word assignment size differs from vocabulary");
  require(in.adjacency.size() == in.k, "naming: adjacency size differs from k");
  const auto df = document_frequency(in.doc_terms, n_terms);
  const double n_docs = static_cast<double>(T);

  std::vector<std::vector<std::uint32_t>> members(in.k), pool(in.k);
  for (std::size_t a = 0; a < T; ++a) members.at(in.article_assignment[a]).push_back(static_cast<std::uint32_t>(a));
  for (std::size_t w = 0; w < n_terms; ++w) pool.at(in.word_assignment[w]).push_back(static_cast<std::uint32_t>(w));
  std::vector<std::uint32_t> all_terms(n_terms);
  for (std::size_t w = 0; w < n_terms; ++w) all_terms[w] = static_cast<std::uint32_t>(w);

  auto inside_counts = [&](const std::vector<std::uint32_t>& docs) {
    std::vector<std::uint32_t> cnt(n_terms, 0);
    for (auto a : docs) {
      for (auto t : in.doc_terms[a]) ++cnt[t];
    }
    return cnt;
  };

  std::vector<ClusterName> names(in.k);
  std::vector<std::optional<std::uint32_t>> first(in.k);
  std::vector<std::vector<std::uint32_t>> counts(in.k);
  auto choose = [&](std::size_t c, const std::vector<std::uint32_t>& candidates, const std::set<std::uint32_t>& banned) {
    const auto ranked = rank_terms(candidates, counts[c], static_cast<double>(members[c].size()), df, n_docs, in.terms);
    for (auto t : ranked) {
      if (!banned.count(t)) return std::optional<std::uint32_t>(t);
    }
    return std::optional<std::uint32_t>();
  };
  auto adjacent_firsts = [&](std::size_t c) {
    std::set<std::uint32_t> banned;
    for (auto o : in.adjacency[c]) {
      if (first[o]) banned.insert(*first[o]);
    }
    return banned;
  };

  // Pass 1: clusters owning words, in index order.
  for (std::size_t c = 0; c < in.k; ++c) {
    counts[c] = inside_counts(members[c]);
    if (pool[c].empty()) continue;
    const auto banned = adjacent_firsts(c);
    first[c] = choose(c, pool[c], banned);
    if (!first[c]) first[c] = choose(c, all_terms, banned);
  }
  // Pass 2: clusters without words draw from the unused global pool.
  std::set<std::uint32_t> used;
  for (const auto& f : first) {
    if (f) used.insert(*f);
  }
  for (std::size_t c = 0; c < in.k; ++c) {
    if (first[c]) continue;
    auto banned = adjacent_firsts(c);
    banned.insert(used.begin(), used.end());
    first[c] = choose(c, all_terms, banned);
    if (!first[c]) first[c] = choose(c, all_terms, adjacent_firsts(c));
    if (!first[c]) first[c] = choose(c, all_terms, {});
    used.insert(*first[c]);
  }

  for (std::size_t c = 0; c < in.k; ++c) {
    ClusterName& name = names[c];
    name.first = *first[c];
    const double size = static_cast<double>(members[c].size());
    name.coverage = size > 0.0 ? counts[c][name.first] / size : 0.0;
    if (name.coverage >= 0.5) continue;
    // Second word over the cluster's articles lacking the first term.
    std::vector<std::uint32_t> rest;
    for (auto a : members[c]) {
      const auto& ts = in.doc_terms[a];
      if (!std::binary_search(ts.begin(), ts.end(), name.first)) rest.push_back(a);
    }
    const auto cnt = inside_counts(rest);
    // A cluster owning a single word has nothing left locally to offer.
    const auto& candidates = pool[c].size() > 1 ? pool[c] : all_terms;
    for (auto t : rank_terms(candidates, cnt, static_cast<double>(rest.size()), df, n_docs, in.terms)) {
      if (t != name.first) {
        name.second = t;
        break;
      }
    }
  }
  return names;
}

std::string ClusterLevel::label(std::size_t cluster, std::span<const std::string> terms) const {
  const auto& n = names.at(cluster);
  std::string out = terms[n.first];
  if (n.second) out += " " + terms[*n.second];
  return out;
}

std::vector<ClusterLevel> build_levels(std::span<const Point2> article_coords, std::span<const Point2> word_coords,
                                       std::span<const std::vector<std::uint32_t>> doc_terms,
                                       std::span<const std::string> terms, std::span<const std::size_t> ks,
                                       std::uint64_t seed) {
  require(!ks.empty(), "clusters: no levels requested");
  for (std::size_t i = 0; i < ks.size(); ++i) {
    require(ks[i] >= 1, "clusters: k must be >= 1");
    require(i == 0 || ks[i] > ks[i - 1], "clusters: ks must be strictly increasing");
  }
  require(ks.back() <= article_coords.size(), "clusters: largest k (" + std::to_string(ks.back()) +
                                                  ") exceeds the number of articles (" +
                                                  std::to_string(article_coords.size()) + ")");
  require(word_coords.size() == terms.size(), "clusters: word coordinates and vocabulary differ in size");
  std::vector<ClusterLevel> levels;
  for (std::size_t l = 0; l < ks.size(); ++l) {
    ClusterLevel level;
    level.level = static_cast<std::uint32_t>(l);
    level.k = ks[l];
    auto km = kmeans(article_coords, ks[l], seed + l);
    level.centroids = std::move(km.centroids);
    level.article_assignment = std::move(km.assignment);
    level.word_assignment = assign_nearest(level.centroids, word_coords);
    level.adjacency = adjacent_clusters(level.centroids);
    NamingInput in{level.k, level.article_assignment, level.word_assignment, doc_terms, terms, level.adjacency};
    level.names = name_clusters(in);
    levels.push_back(std::move(level));
  }
  return levels;
}

}  // namespace cartomap
