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

#include "raster.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "json.hpp"
#include "png_io.hpp"

namespace cartomap {

namespace {

std::size_t pixel_of(double c, std::size_t side) {
  if (!(c >= 0.0 && c <= 1.0)) {
    fail(ErrorCode::InvalidArgument, "point coordinate " + std::to_string(c) + " is outside [0,1]");
  }
  return std::min(side - 1, static_cast<std::size_t>(c * static_cast<double>(side)));
}

class Kernel {
 public:
  explicit Kernel(double sigma) {
    require(sigma >= 0.0 && std::isfinite(sigma), "blur sigma must be finite and >= 0");
    radius_ = sigma > 0.0 ? static_cast<std::ptrdiff_t>(std::floor(3.0 * sigma + 1e-9)) : 0;
    w_.resize(2 * radius_ + 1);
    for (std::ptrdiff_t d = -radius_; d <= radius_; ++d) {
      w_[d + radius_] = radius_ == 0 ? 1.0 : std::exp(-static_cast<double>(d * d) / (2.0 * sigma * sigma));
    }
  }
  std::ptrdiff_t radius() const { return radius_; }
  double at(std::ptrdiff_t d) const { return w_[d + radius_]; }
  // In-bounds kernel mass for a source at position g of an axis of length n.
  double mass(std::ptrdiff_t g, std::ptrdiff_t n) const {
    double m = 0.0;
    for (std::ptrdiff_t d = std::max(-radius_, -g); d <= std::min(radius_, n - 1 - g); ++d) m += at(d);
    return m;
  }

 private:
  std::ptrdiff_t radius_ = 0;
  std::vector<double> w_;
};

// Blurs `hist`, which holds the image cells [hx0, hx0 + w) x [hy0, hy0 + h)
// of a W x H image, and returns the output rectangle [ox0, ox1) x [oy0, oy1).
Grid blur_core(const Grid& hist, std::size_t hx0, std::size_t hy0, std::size_t W, std::size_t H, std::size_t ox0,
               std::size_t oy0, std::size_t ox1, std::size_t oy1, const Kernel& k) {
  const auto r = k.radius();
  const auto ow = ox1 - ox0, oh = oy1 - oy0;
  std::vector<double> norm_x(hist.width), norm_y(hist.height);
  for (std::size_t i = 0; i < hist.width; ++i) {
    norm_x[i] = k.mass(static_cast<std::ptrdiff_t>(hx0 + i), static_cast<std::ptrdiff_t>(W));
  }
  for (std::size_t j = 0; j < hist.height; ++j) {
    norm_y[j] = k.mass(static_cast<std::ptrdiff_t>(hy0 + j), static_cast<std::ptrdiff_t>(H));
  }

  // Horizontal pass into the output columns, all histogram rows.
  Grid tmp(ow, hist.height);
  for (std::size_t j = 0; j < hist.height; ++j) {
    const double* src = &hist.v[j * hist.width];
    double* dst = &tmp.v[j * ow];
    for (std::size_t i = 0; i < hist.width; ++i) {
      if (src[i] == 0.0) continue;
      const auto g = static_cast<std::ptrdiff_t>(hx0 + i);
      const double w = src[i] / norm_x[i];
      const auto lo = std::max(g - r, static_cast<std::ptrdiff_t>(ox0));
      const auto hi = std::min(g + r, static_cast<std::ptrdiff_t>(ox1) - 1);
      for (auto t = lo; t <= hi; ++t) dst[t - static_cast<std::ptrdiff_t>(ox0)] += w * k.at(t - g);
    }
  }

  Grid out(ow, oh);
  for (std::size_t j = 0; j < hist.height; ++j) {
    const auto g = static_cast<std::ptrdiff_t>(hy0 + j);
    const auto lo = std::max(g - r, static_cast<std::ptrdiff_t>(oy0));
    const auto hi = std::min(g + r, static_cast<std::ptrdiff_t>(oy1) - 1);
    if (lo > hi) continue;
    const double* src = &tmp.v[j * ow];
    for (std::size_t c = 0; c < ow; ++c) {
      if (src[c] == 0.0) continue;
      const double w = src[c] / norm_y[j];
      for (auto t = lo; t <= hi; ++t) out.v[static_cast<std::size_t>(t - static_cast<std::ptrdiff_t>(oy0)) * ow + c] += w * k.at(t - g);
    }
  }
  return out;
}

// Exact nearest-rank selection over the nonzero values of several grids
// without holding them all: values are first counted in buckets keyed by
// their float bit pattern, which is monotone for positive numbers.
class PercentileSelector {
 public:
  void count(const Grid& g) {
    for (double v : g.v) {
      if (v > 0.0) {
        ++buckets_[key(v)];
        ++n_;
        max_ = std::max(max_, v);
      }
    }
  }
  bool needs_second_pass() {
    if (n_ < 1000) return false;
    rank_ = static_cast<std::uint64_t>(std::ceil(0.999 * static_cast<double>(n_))) - 1;
    std::uint64_t seen = 0;
    for (std::size_t b = 0; b < buckets_.size(); ++b) {
      if (seen + buckets_[b] > rank_) {
        target_ = b;
        rank_ -= seen;
        break;
      }
      seen += buckets_[b];
    }
    return true;
  }
  void collect(const Grid& g) {
    for (double v : g.v) {
      if (v > 0.0 && key(v) == target_) picked_.push_back(v);
    }
  }
  double result() {
    if (n_ == 0) return 0.0;
    if (n_ < 1000) return max_;
    std::nth_element(picked_.begin(), picked_.begin() + static_cast<std::ptrdiff_t>(rank_), picked_.end());
    return picked_[rank_];
  }

 private:
  static std::size_t key(double v) { return std::bit_cast<std::uint32_t>(static_cast<float>(v)) >> 12; }
  std::vector<std::uint64_t> buckets_ = std::vector<std::uint64_t>(std::size_t{1} << 20, 0);
  std::uint64_t n_ = 0;
  double max_ = 0.0;
  std::uint64_t rank_ = 0;
  std::size_t target_ = 0;
  std::vector<double> picked_;
};

std::uint8_t tone(double v, double denom) {
  if (!(v > 0.0)) return 0;
  const double t = std::round(255.0 * std::log1p(v) / denom);
  return static_cast<std::uint8_t>(std::clamp(t, 0.0, 255.0));
}

}  // namespace

double Grid::sum() const {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

Grid histogram2d(std::span<const Point2> points, std::size_t width, std::size_t height) {
  require(width >= 1 && height >= 1, "histogram dimensions must be >= 1");
  Grid g(width, height);
  for (const auto& p : points) g.at(pixel_of(p.x, width), pixel_of(p.y, height)) += 1.0;
  return g;
}

Grid blur(const Grid& grid, double sigma) {
  const Kernel k(sigma);
  if (k.radius() == 0) return grid;
  return blur_core(grid, 0, 0, grid.width, grid.height, 0, 0, grid.width, grid.height, k);
}

double tone_scale(const Grid& grid) {
  PercentileSelector sel;
  sel.count(grid);
  if (sel.needs_second_pass()) sel.collect(grid);
  return sel.result();
}

std::vector<std::uint8_t> tonemap(const Grid& grid, double scale) {
  std::vector<std::uint8_t> out(grid.v.size(), 0);
  if (!(scale > 0.0)) return out;
  const double denom = std::log1p(scale);
  for (std::size_t i = 0; i < grid.v.size(); ++i) out[i] = tone(grid.v[i], denom);
  return out;
}

Grid render_region(std::span<const Point2> points, std::uint32_t z, std::size_t x0, std::size_t y0, std::size_t x1,
                   std::size_t y1, double sigma) {
  require(z < 24, "zoom level too large");
  const std::size_t side = static_cast<std::size_t>(kTileSize) << z;
  require(x0 < x1 && x1 <= side && y0 < y1 && y1 <= side, "render region outside the image");
  const Kernel k(sigma);
  const auto r = static_cast<std::size_t>(k.radius());
  const std::size_t ex0 = x0 > r ? x0 - r : 0, ey0 = y0 > r ? y0 - r : 0;
  const std::size_t ex1 = std::min(side, x1 + r), ey1 = std::min(side, y1 + r);
  Grid hist(ex1 - ex0, ey1 - ey0);
  for (const auto& p : points) {
    const auto px = pixel_of(p.x, side), py = pixel_of(p.y, side);
    if (px >= ex0 && px < ex1 && py >= ey0 && py < ey1) hist.at(px - ex0, py - ey0) += 1.0;
  }
  return blur_core(hist, ex0, ey0, side, side, x0, y0, x1, y1, k);
}

Tile render_tile(std::span<const Point2> points, TileAddress addr, double sigma, double scale) {
  if (!addr.valid()) {
    fail(ErrorCode::NotFound, "invalid tile address " + std::to_string(addr.z) + "/" + std::to_string(addr.x) + "/" +
                                  std::to_string(addr.y));
  }
  const std::size_t x0 = static_cast<std::size_t>(addr.x) * kTileSize;
  const std::size_t y0 = static_cast<std::size_t>(addr.y) * kTileSize;
  const auto g = render_region(points, addr.z, x0, y0, x0 + kTileSize, y0 + kTileSize, sigma);
  return Tile{addr, tonemap(g, scale)};
}

Tile render_tile_subset(std::span<const Point2> coords, const CompressedIdSet& ids, TileAddress addr, double sigma,
                        double scale) {
  std::vector<Point2> pts;
  pts.reserve(ids.cardinality());
  ids.for_each([&](std::uint32_t id) {
    if (id >= coords.size()) fail(ErrorCode::InvalidArgument, "id " + std::to_string(id) + " has no coordinates");
    pts.push_back(coords[id]);
  });
  return render_tile(pts, addr, sigma, scale);
}

PyramidInfo build_pyramid(std::span<const Point2> points, std::uint32_t zmax, double sigma,
                          const std::function<void(Tile&&)>& sink) {
  require(zmax < 16, "zmax must be below 16");
  const Kernel kernel(sigma);
  const auto r = static_cast<std::size_t>(kernel.radius());
  PyramidInfo info;
  info.zmax = zmax;
  info.sigma = sigma;
  info.point_count = points.size();

  for (std::uint32_t z = 0; z <= zmax; ++z) {
    const std::size_t n = std::size_t{1} << z;
    const std::size_t side = kTileSize * n;

    // Points sorted by pixel row, so each band reads one contiguous slice.
    std::vector<std::size_t> row_start(side + 1, 0);
    for (const auto& p : points) ++row_start[pixel_of(p.y, side) + 1];
    for (std::size_t i = 0; i < side; ++i) row_start[i + 1] += row_start[i];
    std::vector<Point2> by_row(points.size());
    {
      auto fill = row_start;
      for (const auto& p : points) by_row[fill[pixel_of(p.y, side)]++] = p;
    }
    auto band = [&](std::size_t b) {
      const std::size_t y0 = b * kTileSize, y1 = y0 + kTileSize;
      const std::size_t lo = y0 > r ? y0 - r : 0, hi = std::min(side, y1 + r);
      const std::span<const Point2> slice(by_row.data() + row_start[lo], row_start[hi] - row_start[lo]);
      return render_region(slice, z, 0, y0, side, y1, sigma);
    };

    PercentileSelector sel;
    for (std::size_t b = 0; b < n; ++b) sel.count(band(b));
    if (sel.needs_second_pass()) {
      for (std::size_t b = 0; b < n; ++b) sel.collect(band(b));
    }
    const double scale = sel.result();
    info.scales.push_back(scale);

    for (std::size_t b = 0; b < n; ++b) {
      const Grid g = band(b);
      const auto pixels = tonemap(g, scale);
      for (std::size_t x = 0; x < n; ++x) {
        Tile t;
        t.addr = {z, static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(b)};
        t.pixels.resize(static_cast<std::size_t>(kTileSize) * kTileSize);
        for (std::size_t row = 0; row < kTileSize; ++row) {
          std::copy_n(pixels.begin() + static_cast<std::ptrdiff_t>(row * side + x * kTileSize), kTileSize,
                      t.pixels.begin() + static_cast<std::ptrdiff_t>(row * kTileSize));
        }
        sink(std::move(t));
      }
    }
  }
  return info;
}

const Tile& TilePyramid::tile(TileAddress addr) const {
  if (!addr.valid() || addr.z > info.zmax) fail(ErrorCode::NotFound, "tile address outside the pyramid");
  std::size_t offset = 0;
  for (std::uint32_t z = 0; z < addr.z; ++z) offset += std::size_t{1} << (2 * z);
  return tiles.at(offset + (static_cast<std::size_t>(addr.y) << addr.z) + addr.x);
}

TilePyramid build_pyramid(std::span<const Point2> points, std::uint32_t zmax, double sigma) {
  TilePyramid p;
  p.info = build_pyramid(points, zmax, sigma, [&](Tile&& t) { p.tiles.push_back(std::move(t)); });
  return p;
}

std::filesystem::path tile_path(const std::filesystem::path& layer_dir, TileAddress addr) {
  return layer_dir / std::to_string(addr.z) / std::to_string(addr.x) / (std::to_string(addr.y) + ".png");
}

PyramidInfo write_pyramid(std::span<const Point2> points, const std::string& layer, std::uint32_t zmax, double sigma,
                          const std::filesystem::path& root) {
  require(!layer.empty() && layer.find('/') == std::string::npos, "invalid layer name '" + layer + "'");
  const auto dir = root / layer;
  std::filesystem::create_directories(dir);
  auto info = build_pyramid(points, zmax, sigma, [&](Tile&& t) {
    const auto path = tile_path(dir, t.addr);
    std::filesystem::create_directories(path.parent_path());
    write_binary_file(path, encode_png(t.pixels, kTileSize, kTileSize));
  });
  info.layer = layer;
  nlohmann::ordered_json j;
  j["layer"] = layer;
  j["zmax"] = info.zmax;
  j["sigma"] = info.sigma;
  j["tile_size"] = kTileSize;
  j["point_count"] = info.point_count;
  j["scales"] = info.scales;
  write_text_file(dir / "pyramid.json", j.dump(2) + "\n");
  return info;
}

PyramidInfo read_pyramid_info(const std::filesystem::path& layer_dir) {
  const auto path = layer_dir / "pyramid.json";
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
    PyramidInfo info;
    info.layer = j.at("layer").get<std::string>();
    info.zmax = j.at("zmax").get<std::uint32_t>();
    info.sigma = j.at("sigma").get<double>();
    info.point_count = j.at("point_count").get<std::uint64_t>();
    info.scales = j.at("scales").get<std::vector<double>>();
    if (j.at("tile_size").get<std::uint32_t>() != kTileSize) fail(ErrorCode::Format, "unsupported tile size in " + path.string());
    if (info.scales.size() != info.zmax + 1) fail(ErrorCode::Format, "scale count mismatch in " + path.string());
    return info;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Format, "malformed " + path.string() + ": " + e.what());
  }
}

}  // namespace cartomap
