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

#include "project2d.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <string>
#include <unordered_map>

namespace cartomap {

namespace {

constexpr double kSigmaFloorScale = 1e-3;
constexpr double kClip = 4.0;

}  // namespace

Membership smooth_knn(const std::vector<double>& distances, double target) {
  Membership m;
  require(!distances.empty(), "fuzzy_graph: node has no neighbors");
  m.rho = distances.front();
  double lo = 0.0, hi = std::numeric_limits<double>::infinity(), mid = 1.0;
  for (int iter = 0; iter < 64; ++iter) {
    double psum = 0.0;
    for (double d : distances) {
      const double gap = d - m.rho;
      psum += gap > 0.0 ? std::exp(-gap / mid) : 1.0;
    }
    if (std::abs(psum - target) < 1e-5) break;
    if (psum > target) {
      hi = mid;
      mid = (lo + hi) / 2.0;
    } else {
      lo = mid;
      mid = std::isinf(hi) ? mid * 2.0 : (lo + hi) / 2.0;
    }
  }
  // Keep the bandwidth away from zero when the neighborhood is degenerate.
  double mean = 0.0;
  for (double d : distances) mean += d;
  mean /= static_cast<double>(distances.size());
  const double floor = kSigmaFloorScale * (m.rho > 0.0 ? m.rho : mean);
  m.sigma = std::max(mid, floor);
  if (m.sigma <= 0.0) m.sigma = 1e-12;
  m.weights.reserve(distances.size());
  for (double d : distances) {
    const double gap = d - m.rho;
    m.weights.push_back(gap > 0.0 ? std::exp(-gap / m.sigma) : 1.0);
  }
  return m;
}

FuzzyGraph fuzzy_graph(const NeighborLists& knn) {
  const std::size_t n = knn.lists.size();
  require(knn.query_type == knn.target_type, "fuzzy_graph: neighbor lists must be within one entity type");
  FuzzyGraph g;
  g.n = n;
  g.rho.resize(n);
  g.sigma.resize(n);
  const double target = std::log2(static_cast<double>(std::max<std::uint32_t>(knn.k, 2)));
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::pair<double, double>> directed;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& list = knn.lists[i];
    if (list.empty()) fail(ErrorCode::InvalidArgument, "fuzzy_graph: node " + std::to_string(i) + " has no neighbors");
    std::vector<double> dist;
    dist.reserve(list.size());
    for (const auto& nb : list) dist.push_back(nb.distance);
    const auto m = smooth_knn(dist, target);
    g.rho[i] = m.rho;
    g.sigma[i] = m.sigma;
    for (std::size_t r = 0; r < list.size(); ++r) {
      const std::uint32_t j = list[r].id;
      if (j == i || m.weights[r] <= 0.0) continue;
      const auto me = static_cast<std::uint32_t>(i);
      if (me < j) {
        directed[{me, j}].first = m.weights[r];
      } else {
        directed[{j, me}].second = m.weights[r];
      }
    }
  }
  g.edges.reserve(directed.size());
  for (const auto& [key, ab] : directed) {
    const double w = ab.first + ab.second - ab.first * ab.second;
    if (w > 0.0) g.edges.push_back({key.first, key.second, std::min(w, 1.0)});
  }
  return g;
}

CurveParams fit_curve(double min_dist, double spread) {
  require(spread > 0.0 && min_dist >= 0.0 && min_dist < 3.0 * spread, "fit_curve: invalid min_dist/spread");
  constexpr int kSamples = 300;
  std::vector<double> xs(kSamples), ys(kSamples);
  for (int i = 0; i < kSamples; ++i) {
    xs[i] = 3.0 * spread * i / (kSamples - 1);
    ys[i] = xs[i] < min_dist ? 1.0 : std::exp(-(xs[i] - min_dist) / spread);
  }
  auto sse = [&](double a, double b) {
    double s = 0.0;
    for (int i = 0; i < kSamples; ++i) {
      const double r = 1.0 / (1.0 + a * std::pow(xs[i], 2.0 * b)) - ys[i];
      s += r * r;
    }
    return s;
  };
  // Levenberg-Marquardt on two parameters.
  double a = 1.0, b = 1.0, lambda = 1e-3;
  double cur = sse(a, b);
  for (int iter = 0; iter < 500; ++iter) {
    double jtj[2][2] = {{0, 0}, {0, 0}}, jtr[2] = {0, 0};
    for (int i = 0; i < kSamples; ++i) {
      const double x = xs[i];
      const double p = x > 0.0 ? std::pow(x, 2.0 * b) : 0.0;
      const double den = 1.0 + a * p;
      const double f = 1.0 / den;
      const double r = f - ys[i];
      const double da = -p / (den * den);
      const double db = x > 0.0 ? -a * p * 2.0 * std::log(x) / (den * den) : 0.0;
      jtj[0][0] += da * da;
      jtj[0][1] += da * db;
      jtj[1][1] += db * db;
      jtr[0] += da * r;
      jtr[1] += db * r;
    }
    bool improved = false;
    while (lambda < 1e12) {
      const double m00 = jtj[0][0] * (1.0 + lambda), m11 = jtj[1][1] * (1.0 + lambda), m01 = jtj[0][1];
      const double det = m00 * m11 - m01 * m01;
      const double step_a = -(m11 * jtr[0] - m01 * jtr[1]) / det;
      const double step_b = -(m00 * jtr[1] - m01 * jtr[0]) / det;
      const double na = a + step_a, nb = b + step_b;
      const double next = (na > 0.0 && nb > 0.0) ? sse(na, nb) : std::numeric_limits<double>::infinity();
      if (next < cur) {
        const double rel = (cur - next) / std::max(cur, 1e-300);
        a = na;
        b = nb;
        cur = next;
        lambda = std::max(lambda / 10.0, 1e-12);
        improved = rel > 1e-15;
        break;
      }
      lambda *= 10.0;
    }
    if (!improved) break;
  }
  return {a, b};
}

namespace {

struct Sgd {
  double a;
  double b;
  std::size_t negatives;
};

// Edge-sampled layout optimisation. Heads move; tails move too when
// move_tails is set. Negatives are drawn uniformly from [0, neg_pool).
void optimize(std::vector<Point2>& pos, const std::vector<std::uint32_t>& heads,
              const std::vector<std::uint32_t>& tails, const std::vector<double>& weights, std::size_t epochs,
              bool move_tails, std::size_t neg_pool, double initial_alpha, const Sgd& sgd, Rng& rng) {
  const std::size_t m = heads.size();
  if (m == 0 || epochs == 0) return;
  const double max_w = *std::max_element(weights.begin(), weights.end());
  std::vector<double> eps(m), next_sample(m), eps_neg(m), next_neg(m);
  for (std::size_t e = 0; e < m; ++e) {
    eps[e] = weights[e] >= max_w / static_cast<double>(epochs) ? max_w / weights[e] : -1.0;
    next_sample[e] = eps[e];
    eps_neg[e] = eps[e] / static_cast<double>(sgd.negatives);
    next_neg[e] = eps_neg[e];
  }
  const double a = sgd.a, b = sgd.b;
  auto clip = [](double v) { return std::clamp(v, -kClip, kClip); };
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    const double alpha = initial_alpha * (1.0 - static_cast<double>(epoch) / static_cast<double>(epochs));
    const double n = static_cast<double>(epoch);
    for (std::size_t e = 0; e < m; ++e) {
      if (eps[e] <= 0.0 || next_sample[e] > n) continue;
      Point2& cur = pos[heads[e]];
      Point2& other = pos[tails[e]];
      double dx = cur.x - other.x, dy = cur.y - other.y;
      double d2 = dx * dx + dy * dy;
      if (d2 > 0.0) {
        const double coeff = -2.0 * a * b * std::pow(d2, b - 1.0) / (a * std::pow(d2, b) + 1.0);
        const double gx = clip(coeff * dx), gy = clip(coeff * dy);
        cur.x += gx * alpha;
        cur.y += gy * alpha;
        if (move_tails) {
          other.x -= gx * alpha;
          other.y -= gy * alpha;
        }
      }
      next_sample[e] += eps[e];
      if (sgd.negatives == 0) continue;
      const auto n_neg = static_cast<std::size_t>((n - next_neg[e]) / eps_neg[e]);
      for (std::size_t p = 0; p < n_neg; ++p) {
        const auto k = static_cast<std::uint32_t>(rng.index(neg_pool));
        if (k == heads[e]) continue;
        const Point2& neg = pos[k];
        dx = cur.x - neg.x;
        dy = cur.y - neg.y;
        d2 = dx * dx + dy * dy;
        double gx, gy;
        if (d2 > 0.0) {
          const double coeff = 2.0 * b / ((0.001 + d2) * (a * std::pow(d2, b) + 1.0));
          gx = clip(coeff * dx);
          gy = clip(coeff * dy);
        } else {
          gx = gy = kClip;
        }
        cur.x += gx * alpha;
        cur.y += gy * alpha;
      }
      next_neg[e] += static_cast<double>(n_neg) * eps_neg[e];
    }
  }
  for (const auto& p : pos) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) fail(ErrorCode::Internal, "layout diverged: non-finite position");
  }
}

}  // namespace

Projection2D fit_layout(const FuzzyGraph& graph, const std::vector<Point2>& init, const LayoutParams& params) {
  require(params.epochs >= 1, "fit_layout: epochs must be >= 1");
  require(init.size() == graph.n, "fit_layout: init size differs from graph");
  for (const auto& p : init) require(std::isfinite(p.x) && std::isfinite(p.y), "fit_layout: non-finite init");
  Projection2D out;
  out.coords = init;
  out.epochs = params.epochs;
  out.seed = params.seed;
  out.fitted_subset.resize(graph.n);
  for (std::size_t i = 0; i < graph.n; ++i) out.fitted_subset[i] = static_cast<std::uint32_t>(i);
  // Both directions of each undirected edge are sampled, each moving both ends.
  std::vector<std::uint32_t> heads, tails;
  std::vector<double> weights;
  heads.reserve(graph.edges.size() * 2);
  for (const auto& e : graph.edges) {
    heads.push_back(e.i);
    tails.push_back(e.j);
    weights.push_back(e.w);
    heads.push_back(e.j);
    tails.push_back(e.i);
    weights.push_back(e.w);
  }
  const auto curve = fit_curve(params.min_dist, params.spread);
  Rng rng(params.seed);
  optimize(out.coords, heads, tails, weights, params.epochs, true, graph.n, params.learning_rate,
           {curve.a, curve.b, params.negative_samples}, rng);
  return out;
}

std::vector<Point2> transform(const Projection2D& fitted, const NeighborLists& knn_to_fitted,
                              std::size_t refine_epochs, const LayoutParams& params) {
  const std::size_t n_fit = fitted.coords.size();
  const std::size_t n_new = knn_to_fitted.lists.size();
  require(n_fit >= 1, "transform: empty fitted projection");
  std::vector<Point2> pos(fitted.coords);
  pos.resize(n_fit + n_new);
  std::vector<bool> pinned(n_new, false);
  std::vector<std::uint32_t> heads, tails;
  std::vector<double> weights;
  const double target = std::log2(static_cast<double>(std::max<std::uint32_t>(knn_to_fitted.k, 2)));
  for (std::size_t i = 0; i < n_new; ++i) {
    const auto& list = knn_to_fitted.lists[i];
    if (list.empty()) fail(ErrorCode::InvalidArgument, "transform: point " + std::to_string(i) + " has no fitted neighbors");
    for (const auto& nb : list) require(nb.id < n_fit, "transform: neighbor id outside the fitted set");
    Point2 p{0.0, 0.0};
    if (list.front().distance == 0.0f) {
      std::size_t zeros = 0;
      for (const auto& nb : list) {
        if (nb.distance != 0.0f) break;
        p.x += fitted.coords[nb.id].x;
        p.y += fitted.coords[nb.id].y;
        ++zeros;
      }
      p.x /= static_cast<double>(zeros);
      p.y /= static_cast<double>(zeros);
      pinned[i] = true;
    } else {
      std::vector<double> dist;
      for (const auto& nb : list) dist.push_back(nb.distance);
      const auto m = smooth_knn(dist, target);
      double total = 0.0;
      for (std::size_t r = 0; r < list.size(); ++r) {
        p.x += m.weights[r] * fitted.coords[list[r].id].x;
        p.y += m.weights[r] * fitted.coords[list[r].id].y;
        total += m.weights[r];
        heads.push_back(static_cast<std::uint32_t>(n_fit + i));
        tails.push_back(list[r].id);
        weights.push_back(m.weights[r]);
      }
      p.x /= total;
      p.y /= total;
    }
    pos[n_fit + i] = p;
  }
  if (refine_epochs > 0 && !heads.empty()) {
    const auto curve = fit_curve(params.min_dist, params.spread);
    Rng rng(params.seed ^ 0x9e3779b97f4a7c15ULL);
    optimize(pos, heads, tails, weights, refine_epochs, false, n_fit, params.learning_rate / 4.0,
             {curve.a, curve.b, params.negative_samples}, rng);
  }
  return {pos.begin() + static_cast<std::ptrdiff_t>(n_fit), pos.end()};
}

std::vector<Point2> normalize_coords(const std::vector<Point2>& coords) {
  if (coords.empty()) return {};
  double min_x = coords[0].x, max_x = coords[0].x, min_y = coords[0].y, max_y = coords[0].y;
  for (const auto& p : coords) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  const double side = std::max(max_x - min_x, max_y - min_y);
  const double cx = (min_x + max_x) / 2.0, cy = (min_y + max_y) / 2.0;
  std::vector<Point2> out(coords.size(), Point2{0.5, 0.5});
  if (!(side > 0.0)) return out;
  const double scale = 0.96 / side;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    out[i].x = std::clamp(0.5 + (coords[i].x - cx) * scale, 0.0, 1.0);
    out[i].y = std::clamp(0.5 + (coords[i].y - cy) * scale, 0.0, 1.0);
  }
  return out;
}

std::vector<Point2> latent_init(const LatentEmbedding& latent) {
  std::vector<Point2> out(latent.n);
  if (latent.n == 0) return out;
  for (int axis = 0; axis < 2; ++axis) {
    const std::size_t c = static_cast<std::size_t>(axis);
    double mean = 0.0;
    for (std::size_t i = 0; i < latent.n; ++i) mean += c < latent.d ? latent.row(i)[c] : 0.0;
    mean /= static_cast<double>(latent.n);
    double var = 0.0;
    for (std::size_t i = 0; i < latent.n; ++i) {
      const double v = (c < latent.d ? latent.row(i)[c] : 0.0) - mean;
      var += v * v;
    }
    var /= static_cast<double>(latent.n);
    const double inv = var > 0.0 ? 1.0 / std::sqrt(var) : 0.0;
    for (std::size_t i = 0; i < latent.n; ++i) {
      const double v = ((c < latent.d ? latent.row(i)[c] : 0.0) - mean) * inv;
      (axis == 0 ? out[i].x : out[i].y) = v;
    }
  }
  return out;
}

namespace {

LatentEmbedding take_rows(const LatentEmbedding& src, const std::vector<std::uint32_t>& rows) {
  LatentEmbedding out(src.type, rows.size(), src.d);
  out.seed = src.seed;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::copy(src.row(rows[r]).begin(), src.row(rows[r]).end(), out.row(r).begin());
  }
  return out;
}

// Maps every row to the first row with identical bytes.
std::vector<std::uint32_t> representatives(const LatentEmbedding& e, std::vector<std::uint32_t>& unique) {
  std::unordered_map<std::string, std::uint32_t> seen;
  std::vector<std::uint32_t> rep(e.n);
  for (std::size_t i = 0; i < e.n; ++i) {
    const auto row = e.row(i);
    std::string key(reinterpret_cast<const char*>(row.data()), row.size() * sizeof(float));
    auto [it, inserted] = seen.emplace(std::move(key), static_cast<std::uint32_t>(i));
    rep[i] = it->second;
    if (inserted) unique.push_back(static_cast<std::uint32_t>(i));
  }
  return rep;
}

NeighborLists neighbors_for(const LatentEmbedding& queries, const LatentEmbedding& targets, std::uint32_t k,
                            const ProjectionParams& params) {
  if (targets.n < params.exact_knn_below) return knn_exact(queries, targets, k);
  AnnIndex index(targets, params.ann);
  return knn_approx(index, queries, k, params.ann.ef);
}

}  // namespace

Projection2D project_latent(const LatentEmbedding& latent, const ProjectionParams& params, ProjectionModel* model_out) {
  require(latent.n >= 1, "project: no points");
  require(params.subset_fraction > 0.0 && params.subset_fraction <= 1.0, "project: subset_fraction must be in (0, 1]");
  std::vector<std::uint32_t> unique;
  const auto rep = representatives(latent, unique);

  // Uniform sample of distinct rows for fitting, kept in id order.
  std::size_t n_fit = static_cast<std::size_t>(std::llround(params.subset_fraction * static_cast<double>(unique.size())));
  n_fit = std::clamp<std::size_t>(n_fit, 1, std::min(unique.size(), std::max<std::size_t>(params.max_fit, 1)));
  std::vector<std::uint32_t> fit_ids = unique, rest_ids;
  if (n_fit < unique.size()) {
    Rng rng(params.layout.seed ^ 0x5bd1e995ULL);
    rng.shuffle(fit_ids);
    rest_ids.assign(fit_ids.begin() + static_cast<std::ptrdiff_t>(n_fit), fit_ids.end());
    fit_ids.resize(n_fit);
    std::sort(fit_ids.begin(), fit_ids.end());
    std::sort(rest_ids.begin(), rest_ids.end());
  }

  ProjectionModel model;
  model.fitted_latent = take_rows(latent, fit_ids);
  auto init = latent_init(model.fitted_latent);
  if (n_fit >= 3) {
    const auto k = static_cast<std::uint32_t>(std::min(params.n_neighbors, n_fit - 1));
    const auto knn = neighbors_for(model.fitted_latent, model.fitted_latent, k, params);
    model.fitted = fit_layout(fuzzy_graph(knn), init, params.layout);
  } else {
    model.fitted.coords = init;
    model.fitted.epochs = 0;
    model.fitted.seed = params.layout.seed;
  }
  model.fitted.fitted_subset = fit_ids;

  Projection2D out;
  out.coords.assign(latent.n, Point2{});
  out.fitted_subset = fit_ids;
  out.epochs = params.layout.epochs;
  out.seed = params.layout.seed;
  for (std::size_t r = 0; r < fit_ids.size(); ++r) out.coords[fit_ids[r]] = model.fitted.coords[r];
  if (!rest_ids.empty()) {
    const auto placed = place_points(take_rows(latent, rest_ids), model, params);
    for (std::size_t r = 0; r < rest_ids.size(); ++r) out.coords[rest_ids[r]] = placed[r];
  }
  for (std::size_t i = 0; i < latent.n; ++i) out.coords[i] = out.coords[rep[i]];
  if (model_out) *model_out = std::move(model);
  return out;
}

std::vector<Point2> place_points(const LatentEmbedding& points, const ProjectionModel& model,
                                 const ProjectionParams& params) {
  if (points.n == 0) return {};
  require(points.d == model.fitted_latent.d, "project: latent dimension differs from the fitted model");
  std::vector<std::uint32_t> unique;
  const auto rep = representatives(points, unique);
  auto queries = take_rows(points, unique);
  // Same-type neighbor search would exclude index-equal rows; queries are
  // never members of the fitted set here, so compare across a distinct type.
  queries.type = model.fitted_latent.type == EntityType::Word ? EntityType::Article : EntityType::Word;
  const auto k = static_cast<std::uint32_t>(std::min(params.n_neighbors, model.fitted_latent.n));
  const auto knn = neighbors_for(queries, model.fitted_latent, k, params);
  const auto placed = transform(model.fitted, knn, params.refine_epochs, params.layout);
  std::vector<Point2> out(points.n);
  std::vector<std::size_t> slot(points.n);
  for (std::size_t r = 0; r < unique.size(); ++r) slot[unique[r]] = r;
  for (std::size_t i = 0; i < points.n; ++i) out[i] = placed[slot[rep[i]]];
  return out;
}

}  // namespace cartomap
