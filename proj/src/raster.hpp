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

#ifndef CARTOMAP_RASTER_HPP
#define CARTOMAP_RASTER_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "common.hpp"
#include "idset.hpp"

namespace cartomap {

inline constexpr std::uint32_t kTileSize = 256;
inline constexpr double kDefaultSigma = 1.5;

// Row-major grid of densities; row 0 is the top of the map.
struct Grid {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> v;

  Grid() = default;
  Grid(std::size_t w, std::size_t h) : width(w), height(h), v(w * h, 0.0) {}
  double& at(std::size_t x, std::size_t y) { return v[y * width + x]; }
  double at(std::size_t x, std::size_t y) const { return v[y * width + x]; }
  double sum() const;
};

// Bins are half-open; coordinate 1.0 falls into the last bin. Points outside
// [0,1]^2 are rejected.
Grid histogram2d(std::span<const Point2> points, std::size_t width, std::size_t height);

// Separable Gaussian truncated at 3 sigma. Each source cell spreads its
// mass over the in-bounds part of its kernel, renormalized, so the total is
// preserved at the borders.
Grid blur(const Grid& grid, double sigma);

// 99.9th percentile (nearest rank) of the nonzero cells, or their maximum
// when there are fewer than 1000; 0 for an all-zero grid.
double tone_scale(const Grid& grid);
std::vector<std::uint8_t> tonemap(const Grid& grid, double scale);
inline std::vector<std::uint8_t> tonemap(const Grid& grid) { return tonemap(grid, tone_scale(grid)); }

struct TileAddress {
  std::uint32_t z = 0;
  std::uint32_t x = 0;
  std::uint32_t y = 0;

  bool valid() const { return z < 24 && x < (1u << z) && y < (1u << z); }
  friend bool operator==(const TileAddress&, const TileAddress&) = default;
};

struct Tile {
  TileAddress addr;
  std::vector<std::uint8_t> pixels;  // kTileSize * kTileSize
};

// Blurred densities of the pixel rectangle [x0,x1) x [y0,y1) of the
// zoom-z image (side 256 * 2^z). Only points within the blur radius of the
// rectangle are read, and kernel normalization follows the full image
// borders, so the result equals the same crop of the full blurred image.
Grid render_region(std::span<const Point2> points, std::uint32_t z, std::size_t x0, std::size_t y0, std::size_t x1,
                   std::size_t y1, double sigma);

// Tile built from an arbitrary subset of points. `scale` is the tone-map
// scale of the layer at that zoom level.
Tile render_tile(std::span<const Point2> points, TileAddress addr, double sigma, double scale);
Tile render_tile_subset(std::span<const Point2> coords, const CompressedIdSet& ids, TileAddress addr, double sigma,
                        double scale);

struct PyramidInfo {
  std::string layer;
  std::uint32_t zmax = 0;
  double sigma = kDefaultSigma;
  std::uint64_t point_count = 0;
  std::vector<double> scales;  // tone-map scale per zoom level

  friend bool operator==(const PyramidInfo&, const PyramidInfo&) = default;
};

// Streams tiles level by level in (z, y, x) order.
PyramidInfo build_pyramid(std::span<const Point2> points, std::uint32_t zmax, double sigma,
                          const std::function<void(Tile&&)>& sink);

struct TilePyramid {
  PyramidInfo info;
  std::vector<Tile> tiles;

  const Tile& tile(TileAddress addr) const;
};

TilePyramid build_pyramid(std::span<const Point2> points, std::uint32_t zmax, double sigma = kDefaultSigma);

// Writes <root>/<layer>/<z>/<x>/<y>.png and <root>/<layer>/pyramid.json.
PyramidInfo write_pyramid(std::span<const Point2> points, const std::string& layer, std::uint32_t zmax, double sigma,
                          const std::filesystem::path& root);
PyramidInfo read_pyramid_info(const std::filesystem::path& layer_dir);
std::filesystem::path tile_path(const std::filesystem::path& layer_dir, TileAddress addr);

}  // namespace cartomap

#endif  // CARTOMAP_RASTER_HPP
