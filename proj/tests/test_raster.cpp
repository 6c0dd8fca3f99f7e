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

#include "png_io.hpp"
#include "raster.hpp"
#include "test_util.hpp"

namespace cartomap {
namespace {

using testing::TempDir;

std::vector<Point2> random_points(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Point2> pts(n);
  for (auto& p : pts) {
    // Clumped so that tone scales come from dense areas.
    if (rng.uniform() < 0.5) {
      p = {std::clamp(0.3 + 0.05 * rng.normal(), 0.0, 1.0), std::clamp(0.6 + 0.05 * rng.normal(), 0.0, 1.0)};
    } else {
      p = {rng.uniform(), rng.uniform()};
    }
  }
  return pts;
}

std::vector<std::uint8_t> crop(const std::vector<std::uint8_t>& img, std::size_t side, std::size_t x, std::size_t y) {
  std::vector<std::uint8_t> out;
  out.reserve(kTileSize * kTileSize);
  for (std::size_t r = 0; r < kTileSize; ++r) {
    const auto* row = img.data() + (y * kTileSize + r) * side + x * kTileSize;
    out.insert(out.end(), row, row + kTileSize);
  }
  return out;
}

int max_abs_diff(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
  int d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(int(a[i]) - int(b[i])));
  return d;
}

TEST(Histogram, Binning) {
  const std::vector<Point2> one = {{0.5, 0.5}};
  const auto g = histogram2d(one, 2, 2);
  EXPECT_EQ(g.v, (std::vector<double>{0, 0, 0, 1}));

  const std::vector<Point2> corners = {{0, 0}, {1, 1}, {1, 0}, {0.999, 0.25}};
  const auto c = histogram2d(corners, 4, 4);
  EXPECT_EQ(c.at(0, 0), 1.0);
  EXPECT_EQ(c.at(3, 3), 1.0);
  EXPECT_EQ(c.at(3, 0), 1.0);
  EXPECT_EQ(c.at(3, 1), 1.0);
  EXPECT_EQ(c.sum(), 4.0);

  const std::vector<Point2> bad = {{0.5, 1.01}};
  EXPECT_THROW(histogram2d(bad, 4, 4), Error);
  const std::vector<Point2> nan = {{std::nan(""), 0.5}};
  EXPECT_THROW(histogram2d(nan, 4, 4), Error);
  EXPECT_THROW(histogram2d(one, 0, 4), Error);
}

TEST(Histogram, UniformCountsWithinBinomialBound) {
  Rng rng(3);
  std::vector<Point2> pts(10000);
  for (auto& p : pts) p = {rng.uniform(), rng.uniform()};
  const auto g = histogram2d(pts, 16, 16);
  EXPECT_EQ(g.sum(), 10000.0);
  const double p = 1.0 / 256.0;
  const double mean = 10000.0 * p, sd = std::sqrt(10000.0 * p * (1.0 - p));
  for (double v : g.v) EXPECT_LE(std::abs(v - mean), 5.0 * sd);
}

TEST(Blur, SigmaZeroIsIdentity) {
  const auto g = histogram2d(random_points(500, 1), 32, 32);
  EXPECT_EQ(blur(g, 0.0).v, g.v);
  EXPECT_THROW(blur(g, -1.0), Error);
}

TEST(Blur, PreservesMassIncludingBorders) {
  Grid g(40, 30);
  Rng rng(5);
  for (auto& v : g.v) v = rng.uniform() < 0.3 ? std::floor(rng.uniform() * 10) : 0.0;
  g.at(0, 0) = 50;
  g.at(39, 29) = 70;
  g.at(39, 0) = 20;
  for (double sigma : {0.5, 1.5, 3.0, 10.0}) {
    const auto b = blur(g, sigma);
    EXPECT_NEAR(b.sum(), g.sum(), 1e-6 * g.sum()) << sigma;
  }
}

TEST(Blur, ImpulseMatchesGaussianProduct) {
  Grid g(31, 31);
  g.at(15, 15) = 1.0;
  const double sigma = 1.5;
  const auto b = blur(g, sigma);
  const int r = 4;  // 3 sigma truncation
  double norm = 0.0;
  for (int d = -r; d <= r; ++d) norm += std::exp(-d * d / (2 * sigma * sigma));
  for (int y = 0; y < 31; ++y) {
    for (int x = 0; x < 31; ++x) {
      const int dx = x - 15, dy = y - 15;
      double expected = 0.0;
      if (std::abs(dx) <= r && std::abs(dy) <= r) {
        expected = std::exp(-dx * dx / (2 * sigma * sigma)) * std::exp(-dy * dy / (2 * sigma * sigma)) / (norm * norm);
      }
      EXPECT_NEAR(b.at(x, y), expected, 1e-6) << x << "," << y;
      EXPECT_NEAR(b.at(x, y), b.at(30 - x, y), 1e-15);
      EXPECT_NEAR(b.at(x, y), b.at(y, x), 1e-15);
    }
  }
}

TEST(Tonemap, EndpointsAndMonotonicity) {
  Grid zero(8, 8);
  EXPECT_EQ(tonemap(zero), std::vector<std::uint8_t>(64, 0));
  EXPECT_EQ(tone_scale(zero), 0.0);

  Grid g(10, 10);
  for (std::size_t i = 0; i < g.v.size(); ++i) g.v[i] = static_cast<double>(i % 37) * 0.7;
  const auto px = tonemap(g);
  const double maxv = *std::max_element(g.v.begin(), g.v.end());
  EXPECT_EQ(tone_scale(g), maxv);  // fewer than 1000 nonzero cells
  for (std::size_t i = 0; i < g.v.size(); ++i) {
    if (g.v[i] == maxv) EXPECT_EQ(px[i], 255);
    for (std::size_t j = 0; j < g.v.size(); ++j) {
      if (g.v[i] <= g.v[j]) EXPECT_LE(px[i], px[j]);
    }
  }
}

TEST(Tonemap, NearestRankPercentile) {
  Grid g(100, 50);
  Rng rng(8);
  std::vector<double> nonzero;
  for (auto& v : g.v) {
    if (rng.uniform() < 0.8) {
      v = std::exp(3.0 * rng.normal());
      nonzero.push_back(v);
    }
  }
  std::sort(nonzero.begin(), nonzero.end());
  const auto rank = static_cast<std::size_t>(std::ceil(0.999 * static_cast<double>(nonzero.size()))) - 1;
  EXPECT_EQ(tone_scale(g), nonzero[rank]);
  const auto px = tonemap(g);
  for (std::size_t i = 0; i < g.v.size(); ++i) {
    if (g.v[i] >= nonzero[rank]) EXPECT_EQ(px[i], 255);
    if (g.v[i] == 0.0) EXPECT_EQ(px[i], 0);
  }
}

TEST(Pyramid, TileCounts) {
  const auto pts = random_points(300, 2);
  EXPECT_EQ(build_pyramid(pts, 0).tiles.size(), 1u);
  const auto p = build_pyramid(pts, 2);
  EXPECT_EQ(p.tiles.size(), 21u);
  EXPECT_EQ(p.info.scales.size(), 3u);
  EXPECT_EQ(p.tile({2, 3, 1}).addr, (TileAddress{2, 3, 1}));
  EXPECT_THROW(p.tile({3, 0, 0}), Error);
}

TEST(Pyramid, PointLandsInItsQuadrant) {
  const std::vector<Point2> pts = {{0.9, 0.9}};
  const auto p = build_pyramid(pts, 1);
  for (std::uint32_t x = 0; x < 2; ++x) {
    for (std::uint32_t y = 0; y < 2; ++y) {
      const auto& t = p.tile({1, x, y});
      const bool any = std::any_of(t.pixels.begin(), t.pixels.end(), [](auto v) { return v != 0; });
      EXPECT_EQ(any, x == 1 && y == 1) << x << "," << y;
    }
  }
}

TEST(Pyramid, TilesAreCropsOfTheFullImage) {
  const auto pts = random_points(4000, 4);
  const auto p = build_pyramid(pts, 2);
  for (std::uint32_t z = 0; z <= 2; ++z) {
    const std::size_t side = kTileSize << z;
    const auto full = blur(histogram2d(pts, side, side), kDefaultSigma);
    EXPECT_NEAR(full.sum(), 4000.0, 1e-6);  // mass is the same at every level
    EXPECT_EQ(p.info.scales[z], tone_scale(full)) << z;
    const auto img = tonemap(full);
    for (std::uint32_t x = 0; x < (1u << z); ++x) {
      for (std::uint32_t y = 0; y < (1u << z); ++y) {
        EXPECT_EQ(max_abs_diff(p.tile({z, x, y}).pixels, crop(img, side, x, y)), 0) << z << "/" << x << "/" << y;
      }
    }
  }
}

TEST(SubsetTiles, EmptyAllAndSingle) {
  const auto pts = random_points(3000, 6);
  const auto p = build_pyramid(pts, 2);
  const TileAddress addr{2, 1, 2};
  const auto empty = render_tile_subset(pts, CompressedIdSet{}, addr, kDefaultSigma, p.info.scales[2]);
  EXPECT_EQ(empty.pixels, std::vector<std::uint8_t>(kTileSize * kTileSize, 0));

  const auto all = CompressedIdSet::range(0, pts.size());
  for (std::uint32_t z = 0; z <= 2; ++z) {
    for (std::uint32_t x = 0; x < (1u << z); ++x) {
      for (std::uint32_t y = 0; y < (1u << z); ++y) {
        const auto t = render_tile_subset(pts, all, {z, x, y}, kDefaultSigma, p.info.scales[z]);
        EXPECT_LE(max_abs_diff(t.pixels, p.tile({z, x, y}).pixels), 1);
      }
    }
  }

  // One point in the middle of tile (1, 0, 0): a symmetric blob on its pixel.
  const std::vector<Point2> one = {{(100.5) / 512.0, (60.5) / 512.0}};
  const auto t = render_tile(one, {1, 0, 0}, kDefaultSigma, 1.0);
  const auto at = [&](int x, int y) { return t.pixels[static_cast<std::size_t>(y) * kTileSize + x]; };
  const auto peak = std::max_element(t.pixels.begin(), t.pixels.end()) - t.pixels.begin();
  EXPECT_EQ(peak % kTileSize, 100);
  EXPECT_EQ(peak / kTileSize, 60);
  for (int d = 1; d <= 4; ++d) {
    EXPECT_EQ(at(100 - d, 60), at(100 + d, 60));
    EXPECT_EQ(at(100, 60 - d), at(100, 60 + d));
  }
  EXPECT_EQ(at(105, 60), 0);
  EXPECT_THROW(render_tile(one, {1, 2, 0}, kDefaultSigma, 1.0), Error);
}

TEST(SubsetTiles, SeamsMatchFullSubsetImage) {
  const auto pts = random_points(5000, 7);
  Rng rng(9);
  std::vector<std::uint32_t> chosen;
  std::vector<Point2> subset;
  for (std::uint32_t i = 0; i < pts.size(); ++i) {
    if (rng.uniform() < 0.3) {
      chosen.push_back(i);
      subset.push_back(pts[i]);
    }
  }
  const auto ids = CompressedIdSet::from_sorted(chosen);
  const std::uint32_t z = 2;
  const std::size_t side = kTileSize << z;
  const auto full = blur(histogram2d(subset, side, side), kDefaultSigma);
  const double scale = tone_scale(full);
  const auto img = tonemap(full, scale);
  std::vector<std::vector<std::uint8_t>> tiles(16);
  for (std::uint32_t x = 0; x < 4; ++x) {
    for (std::uint32_t y = 0; y < 4; ++y) {
      tiles[y * 4 + x] = render_tile_subset(pts, ids, {z, x, y}, kDefaultSigma, scale).pixels;
      EXPECT_LE(max_abs_diff(tiles[y * 4 + x], crop(img, side, x, y)), 1);
    }
  }
  // Along every vertical seam, the boundary columns agree with the full image.
  for (std::uint32_t y = 0; y < 4; ++y) {
    for (std::uint32_t x = 0; x + 1 < 4; ++x) {
      for (std::size_t r = 0; r < kTileSize; ++r) {
        const auto left = tiles[y * 4 + x][r * kTileSize + kTileSize - 1];
        const auto right = tiles[y * 4 + x + 1][r * kTileSize];
        const auto row = (y * kTileSize + r) * side + (x + 1) * kTileSize;
        EXPECT_LE(std::abs(int(left) - int(img[row - 1])), 1);
        EXPECT_LE(std::abs(int(right) - int(img[row])), 1);
      }
    }
  }
}

TEST(SubsetTiles, HistogramsAreAdditive) {
  const auto pts = random_points(2000, 10);
  std::vector<Point2> a(pts.begin(), pts.begin() + 700), b(pts.begin() + 700, pts.end());
  const auto ga = render_region(a, 1, 256, 0, 512, 256, 0.0);
  const auto gb = render_region(b, 1, 256, 0, 512, 256, 0.0);
  const auto gab = render_region(pts, 1, 256, 0, 512, 256, 0.0);
  for (std::size_t i = 0; i < gab.v.size(); ++i) EXPECT_EQ(ga.v[i] + gb.v[i], gab.v[i]);
}

TEST(PyramidFiles, DeterministicPngLayout) {
  const auto pts = random_points(2000, 11);
  TempDir a, b;
  const auto info = write_pyramid(pts, "articles", 2, kDefaultSigma, a.path());
  write_pyramid(pts, "articles", 2, kDefaultSigma, b.path());
  EXPECT_EQ(read_pyramid_info(a / "articles"), info);
  const auto mem = build_pyramid(pts, 2);
  for (std::uint32_t z = 0; z <= 2; ++z) {
    for (std::uint32_t x = 0; x < (1u << z); ++x) {
      for (std::uint32_t y = 0; y < (1u << z); ++y) {
        const auto pa = read_binary_file(tile_path(a / "articles", {z, x, y}));
        EXPECT_EQ(pa, read_binary_file(tile_path(b / "articles", {z, x, y})));
        const auto img = decode_png(pa);
        EXPECT_EQ(img.width, kTileSize);
        EXPECT_EQ(img.height, kTileSize);
        EXPECT_EQ(img.pixels, mem.tile({z, x, y}).pixels);
      }
    }
  }
  EXPECT_THROW(write_pyramid(pts, "a/b", 0, 1.5, a.path()), Error);
}

TEST(Png, RoundTripAndRejection) {
  std::vector<std::uint8_t> px(7 * 3);
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<std::uint8_t>(i * 11);
  const auto bytes = encode_png(px, 7, 3);
  const auto img = decode_png(bytes);
  EXPECT_EQ(img.width, 7u);
  EXPECT_EQ(img.height, 3u);
  EXPECT_EQ(img.pixels, px);
  EXPECT_THROW(decode_png(std::span(bytes).first(40)), Error);
  const std::vector<std::uint8_t> junk = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  EXPECT_THROW(decode_png(junk), Error);
}

}  // namespace
}  // namespace cartomap
