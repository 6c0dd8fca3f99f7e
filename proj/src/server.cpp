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

#include "server.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>

#include "httplib.h"
#include "json.hpp"
#include "png_io.hpp"

namespace cartomap {

using json = nlohmann::ordered_json;

namespace {

constexpr std::size_t kLabelCells = 64;
constexpr std::size_t kSearchCap = 20;
constexpr std::size_t kFilterCacheSize = 32;

bool better(const LabelHit& a, const LabelHit& b) { return a.score > b.score || (a.score == b.score && a.id < b.id); }

std::size_t label_cell(double c) {
  return std::min(kLabelCells - 1, static_cast<std::size_t>(c * static_cast<double>(kLabelCells)));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) return out;
    start = pos + 1;
  }
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  T v{};
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

[[noreturn]] void bad_request(const std::string& what) { fail(ErrorCode::InvalidArgument, what); }

HttpResponse json_response(const json& j, int status = 200) {
  HttpResponse r;
  r.status = status;
  r.body = j.dump();
  return r;
}

HttpResponse error_response(int status, const std::string& message) {
  return json_response(json{{"error", message}}, status);
}

BBox parse_bbox(const std::optional<std::string>& text) {
  BBox b;
  if (!text) return b;
  const auto parts = split(*text, ',');
  if (parts.size() != 4) bad_request("bbox must be x0,y0,x1,y1");
  double v[4];
  for (int i = 0; i < 4; ++i) {
    const auto d = parse_number<double>(trim(parts[static_cast<std::size_t>(i)]));
    if (!d || !std::isfinite(*d)) bad_request("bbox coordinate '" + parts[static_cast<std::size_t>(i)] + "' is not a number");
    v[i] = *d;
  }
  if (!(v[0] < v[2] && v[1] < v[3])) bad_request("bbox must satisfy x0 < x1 and y0 < y1");
  b = {std::clamp(v[0], 0.0, 1.0), std::clamp(v[1], 0.0, 1.0), std::clamp(v[2], 0.0, 1.0), std::clamp(v[3], 0.0, 1.0)};
  return b;
}

std::uint32_t parse_u32(const std::optional<std::string>& text, std::uint32_t fallback, const char* name) {
  if (!text) return fallback;
  const auto v = parse_number<std::uint32_t>(*text);
  if (!v) bad_request(std::string(name) + " must be a non-negative integer");
  return *v;
}

// "/a/b/c" -> {"a", "b", "c"}
std::vector<std::string> path_segments(const std::string& path) {
  std::vector<std::string> out;
  for (auto& s : split(path, '/')) {
    if (!s.empty()) out.push_back(std::move(s));
  }
  return out;
}

std::optional<TileAddress> parse_tile_address(const std::vector<std::string>& seg, std::size_t at) {
  if (seg.size() != at + 3) return std::nullopt;
  std::string last = seg[at + 2];
  if (last.size() < 5 || last.substr(last.size() - 4) != ".png") return std::nullopt;
  last.resize(last.size() - 4);
  const auto z = parse_number<std::uint32_t>(seg[at]);
  const auto x = parse_number<std::uint32_t>(seg[at + 1]);
  const auto y = parse_number<std::uint32_t>(last);
  if (!z || !x || !y) return std::nullopt;
  return TileAddress{*z, *x, *y};
}

const char* state_name(JobState s) {
  switch (s) {
    case JobState::Queued: return "queued";
    case JobState::Rendering: return "rendering";
    case JobState::Done: return "done";
    case JobState::Cancelled: return "cancelled";
  }
  return "unknown";
}

double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
  return v[std::min(v.size() - 1, rank == 0 ? 0 : rank - 1)];
}

}  // namespace

std::optional<std::string> HttpRequest::param(const std::string& key) const {
  auto it = query.find(key);
  if (it == query.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------- MapData

std::shared_ptr<const MapData> MapData::assemble(MapSnapshot snapshot, FacetIndex facets, TileIndex tiles,
                                                 std::vector<LayerData> layers) {
  auto d = std::make_shared<MapData>();
  d->snapshot = std::move(snapshot);
  d->facets = std::move(facets);
  d->tiles = std::move(tiles);
  d->layers = std::move(layers);
  d->coords = global_coords(d->snapshot);
  if (d->facets.universe != d->snapshot.total()) {
    fail(ErrorCode::Format, "facet index covers " + std::to_string(d->facets.universe) + " entities, snapshot has " +
                                std::to_string(d->snapshot.total()));
  }
  for (const auto& layer : d->layers) {
    if (layer.info.zmax > d->tiles.zmax) {
      fail(ErrorCode::Format, "layer " + layer.name + " is deeper than the tile index");
    }
  }
  return d;
}

std::shared_ptr<const MapData> MapData::open(const std::filesystem::path& data_dir) {
  auto snapshot = load_map(data_dir / "snapshot");
  auto facets = FacetIndex::load(data_dir / "index");
  auto tiles = TileIndex::load(data_dir / "index");
  std::vector<LayerData> layers;
  const auto layer_root = data_dir / "layers";
  if (std::filesystem::is_directory(layer_root)) {
    std::vector<std::filesystem::path> dirs;
    for (const auto& entry : std::filesystem::directory_iterator(layer_root)) {
      if (entry.is_directory()) dirs.push_back(entry.path());
    }
    std::sort(dirs.begin(), dirs.end());
    for (const auto& dir : dirs) {
      LayerData layer;
      layer.name = dir.filename().string();
      const auto type = parse_entity_type(layer.name);
      if (!type) fail(ErrorCode::Format, "layer directory '" + layer.name + "' does not name an entity type");
      layer.type = *type;
      layer.info = read_pyramid_info(dir);
      layer.dir = dir;
      layers.push_back(std::move(layer));
    }
  }
  return assemble(std::move(snapshot), std::move(facets), std::move(tiles), std::move(layers));
}

// -------------------------------------------------------------- TileCache

std::shared_ptr<const std::vector<std::uint8_t>> TileCache::get(const std::string& key) {
  std::lock_guard lock(mu_);
  auto it = map_.find(key);
  if (it == map_.end()) {
    ++misses_;
    return nullptr;
  }
  ++hits_;
  order_.splice(order_.begin(), order_, it->second);
  return it->second->second;
}

std::shared_ptr<const std::vector<std::uint8_t>> TileCache::put(const std::string& key, std::vector<std::uint8_t> value) {
  auto ptr = std::make_shared<const std::vector<std::uint8_t>>(std::move(value));
  if (capacity_ == 0) return ptr;
  std::lock_guard lock(mu_);
  auto it = map_.find(key);
  if (it != map_.end()) {
    order_.splice(order_.begin(), order_, it->second);
    return it->second->second;
  }
  order_.emplace_front(key, ptr);
  map_[key] = order_.begin();
  while (order_.size() > capacity_) {
    map_.erase(order_.back().first);
    order_.pop_back();
  }
  return ptr;
}

std::size_t TileCache::size() const {
  std::lock_guard lock(mu_);
  return order_.size();
}

// ------------------------------------------------------------- MapService

struct MapService::LabelGrid {
  std::vector<std::vector<LabelHit>> cells = std::vector<std::vector<LabelHit>>(kLabelCells * kLabelCells);
  std::vector<Point2> pos;  // by global id offset within the type
  std::uint32_t base = 0;
};

struct MapService::Job {
  JobStatus status;
  FilterExpr expr;
};

std::vector<TileAddress> center_out_tiles(const BBox& bbox, std::uint32_t z) {
  require(z < 24, "zoom level too large");
  const std::uint32_t n = 1u << z;
  auto cell = [&](double c) { return std::min(n - 1, static_cast<std::uint32_t>(c * n)); };
  const double cx = (bbox.x0 + bbox.x1) / 2.0, cy = (bbox.y0 + bbox.y1) / 2.0;
  std::vector<std::pair<double, TileAddress>> tiles;
  for (std::uint32_t y = cell(bbox.y0); y <= cell(bbox.y1); ++y) {
    for (std::uint32_t x = cell(bbox.x0); x <= cell(bbox.x1); ++x) {
      const double dx = (x + 0.5) / n - cx, dy = (y + 0.5) / n - cy;
      tiles.push_back({dx * dx + dy * dy, TileAddress{z, x, y}});
    }
  }
  std::stable_sort(tiles.begin(), tiles.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<TileAddress> out;
  for (const auto& t : tiles) out.push_back(t.second);
  return out;
}

MapService::MapService(std::shared_ptr<const MapData> data, ServerConfig config)
    : data_(std::move(data)), config_(std::move(config)), cache_(config_.cache_size) {
  require(!config_.zoom_levels.empty(), "zoom_levels must not be empty");
  const auto& s = data_->snapshot;
  for (EntityType t : kAllEntityTypes) {
    auto grid = std::make_unique<LabelGrid>();
    grid->base = s.global_id(t, 0);
    const auto& list = s.of(t);
    for (std::uint32_t i = 0; i < list.size(); ++i) {
      const auto& e = list[i];
      grid->cells[label_cell(e.pos.y) * kLabelCells + label_cell(e.pos.x)].push_back({grid->base + i, t, e.score});
      grid->pos.push_back(e.pos);
    }
    for (auto& c : grid->cells) std::sort(c.begin(), c.end(), better);
    label_grids_.push_back(std::move(grid));
  }
  std::uint32_t gid = 0;
  for (const auto& list : s.entities) {
    for (const auto& e : list) search_keys_.emplace_back(to_lower_ascii(e.label), gid++);
  }
  std::sort(search_keys_.begin(), search_keys_.end());

  std::size_t n_workers = config_.workers;
  if (n_workers == 0) n_workers = std::max(1u, std::thread::hardware_concurrency());
  for (std::size_t i = 0; i < n_workers; ++i) workers_.emplace_back([this] { worker_loop(); });
}

MapService::~MapService() {
  {
    std::lock_guard lock(jobs_mu_);
    stopping_ = true;
  }
  jobs_cv_.notify_all();
  for (auto& w : workers_) w.join();
}

const LayerData* MapService::find_layer(const std::string& name) const {
  for (const auto& l : data_->layers) {
    if (l.name == name) return &l;
  }
  return nullptr;
}

std::uint32_t MapService::cluster_level_for_zoom(std::uint32_t zoom) const {
  const auto& levels = config_.zoom_levels;
  return levels[std::min<std::size_t>(zoom, levels.size() - 1)];
}

std::vector<LabelHit> MapService::labels(const ViewportQuery& q) const {
  require(q.limit >= 1, "limit must be >= 1");
  require(q.bbox.x0 < q.bbox.x1 && q.bbox.y0 < q.bbox.y1, "bbox must satisfy x0 < x1 and y0 < y1");
  std::vector<EntityType> types = q.types;
  if (types.empty()) types.assign(kAllEntityTypes.begin(), kAllEntityTypes.end());
  const double cw = 1.0 / static_cast<double>(kLabelCells);
  std::vector<LabelHit> out;
  for (EntityType t : types) {
    const auto& grid = *label_grids_[static_cast<std::size_t>(t)];
    std::vector<LabelHit> cand;
    for (std::size_t cy = label_cell(q.bbox.y0); cy <= label_cell(q.bbox.y1); ++cy) {
      for (std::size_t cx = label_cell(q.bbox.x0); cx <= label_cell(q.bbox.x1); ++cx) {
        const auto& cell = grid.cells[cy * kLabelCells + cx];
        const bool inside = cx * cw >= q.bbox.x0 && (cx + 1) * cw <= q.bbox.x1 && cy * cw >= q.bbox.y0 &&
                            (cy + 1) * cw <= q.bbox.y1;
        std::size_t taken = 0;
        for (const auto& h : cell) {
          if (taken == q.limit) break;
          if (inside || q.bbox.contains(grid.pos[h.id - grid.base])) {
            cand.push_back(h);
            ++taken;
          }
        }
      }
    }
    const auto keep = std::min(q.limit, cand.size());
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(keep), cand.end(), better);
    out.insert(out.end(), cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(keep));
  }
  std::sort(out.begin(), out.end(), better);
  return out;
}

CompressedIdSet MapService::filter_ids(const FilterExpr& expr) {
  const auto key = expr.canonical();
  {
    std::lock_guard lock(filter_mu_);
    for (auto it = filter_cache_.begin(); it != filter_cache_.end(); ++it) {
      if (it->first == key) {
        filter_cache_.splice(filter_cache_.begin(), filter_cache_, it);
        return *filter_cache_.front().second;
      }
    }
  }
  auto ids = std::make_shared<const CompressedIdSet>(eval_filter(expr, data_->facets));
  std::lock_guard lock(filter_mu_);
  filter_cache_.emplace_front(key, ids);
  if (filter_cache_.size() > kFilterCacheSize) filter_cache_.pop_back();
  return *ids;
}

std::shared_ptr<const std::vector<std::uint8_t>> MapService::filtered_tile(const std::string& layer_name,
                                                                           const FilterExpr& expr, TileAddress addr) {
  const auto* layer = find_layer(layer_name);
  if (!layer) fail(ErrorCode::NotFound, "unknown layer '" + layer_name + "'");
  if (!addr.valid() || addr.z > layer->info.zmax) fail(ErrorCode::NotFound, "tile address outside the pyramid");
  const std::string key = layer_name + "/" + std::to_string(addr.z) + "/" + std::to_string(addr.x) + "/" +
                          std::to_string(addr.y) + "?" + expr.canonical();
  if (auto hit = cache_.get(key)) return hit;

  const auto t0 = std::chrono::steady_clock::now();
  const auto matched = filter_ids(expr);
  const auto& s = data_->snapshot;
  const auto base = s.global_id(layer->type, 0);
  const auto of_type = CompressedIdSet::range(base, std::uint64_t{base} + s.of(layer->type).size());
  const auto ids = set_intersect(set_intersect(data_->tiles.neighborhood(addr), of_type), matched);
  const auto tile = render_tile_subset(data_->coords, ids, addr, layer->info.sigma, layer->info.scales[addr.z]);
  auto png = encode_png(tile.pixels, kTileSize, kTileSize);
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  ++renders_;
  {
    std::lock_guard lock(stats_mu_);
    render_ms_.push_back(ms);
  }
  return cache_.put(key, std::move(png));
}

// ------------------------------------------------------------------- jobs

std::uint64_t MapService::submit_job(const std::string& layer_name, const FilterExpr& expr,
                                     std::vector<TileAddress> tiles) {
  const auto* layer = find_layer(layer_name);
  if (!layer) fail(ErrorCode::NotFound, "unknown layer '" + layer_name + "'");
  for (const auto& a : tiles) {
    if (!a.valid() || a.z > layer->info.zmax) fail(ErrorCode::NotFound, "tile address outside the pyramid");
  }
  (void)filter_ids(expr);  // reject bad filters before queueing
  auto job = std::make_shared<Job>();
  job->expr = expr;
  job->status.layer = layer_name;
  job->status.filter = expr.canonical();
  job->status.tiles = std::move(tiles);
  job->status.completed.assign(job->status.tiles.size(), false);
  std::lock_guard lock(jobs_mu_);
  job->status.id = next_job_++;
  if (job->status.tiles.empty()) job->status.state = JobState::Done;
  jobs_[job->status.id] = job;
  for (std::size_t i = 0; i < job->status.tiles.size(); ++i) queue_.emplace_back(job, i);
  jobs_cv_.notify_all();
  return job->status.id;
}

std::optional<JobStatus> MapService::job(std::uint64_t id) const {
  std::lock_guard lock(jobs_mu_);
  auto it = jobs_.find(id);
  if (it == jobs_.end()) return std::nullopt;
  return it->second->status;
}

bool MapService::cancel_job(std::uint64_t id) {
  std::lock_guard lock(jobs_mu_);
  auto it = jobs_.find(id);
  if (it == jobs_.end()) return false;
  auto& st = it->second->status;
  if (st.state != JobState::Done) st.state = JobState::Cancelled;
  queue_.erase(std::remove_if(queue_.begin(), queue_.end(), [&](const auto& item) { return item.first->status.id == id; }),
               queue_.end());
  job_done_cv_.notify_all();
  return true;
}

void MapService::wait_job(std::uint64_t id) {
  std::unique_lock lock(jobs_mu_);
  job_done_cv_.wait(lock, [&] {
    auto it = jobs_.find(id);
    return it == jobs_.end() || it->second->status.state == JobState::Done ||
           it->second->status.state == JobState::Cancelled;
  });
}

void MapService::worker_loop() {
  while (true) {
    std::shared_ptr<Job> job;
    std::size_t index = 0;
    {
      std::unique_lock lock(jobs_mu_);
      jobs_cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      std::tie(job, index) = queue_.front();
      queue_.pop_front();
      if (job->status.state == JobState::Cancelled) continue;
      job->status.state = JobState::Rendering;
    }
    bool ok = true;
    try {
      filtered_tile(job->status.layer, job->expr, job->status.tiles[index]);
    } catch (const std::exception&) {
      ok = false;
    }
    std::lock_guard lock(jobs_mu_);
    if (job->status.state == JobState::Cancelled) continue;
    if (ok) {
      job->status.completed[index] = true;
      ++job->status.emitted;
    }
    const bool pending = std::any_of(queue_.begin(), queue_.end(), [&](const auto& item) { return item.first == job; });
    if (!pending && std::all_of(job->status.completed.begin(), job->status.completed.end(), [](bool b) { return b; })) {
      job->status.state = JobState::Done;
      job_done_cv_.notify_all();
    } else if (!pending && !ok) {
      job->status.state = JobState::Done;
      job_done_cv_.notify_all();
    }
  }
}

// ----------------------------------------------------------------- routes

HttpResponse MapService::handle(const HttpRequest& request) {
  HttpResponse r;
  try {
    r = route(request);
  } catch (const Error& e) {
    switch (e.code()) {
      case ErrorCode::InvalidArgument: r = error_response(400, e.what()); break;
      case ErrorCode::NotFound: r = error_response(404, e.what()); break;
      default: r = error_response(500, e.what()); break;
    }
  } catch (const std::exception& e) {
    r = error_response(500, e.what());
  }
  r.headers.emplace_back("Access-Control-Allow-Origin", "*");
  return r;
}

HttpResponse MapService::route(const HttpRequest& req) {
  const auto seg = path_segments(req.path);
  if (req.method == "OPTIONS") {
    HttpResponse r;
    r.status = 204;
    r.headers.emplace_back("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS");
    r.headers.emplace_back("Access-Control-Allow-Headers", "Content-Type");
    return r;
  }
  if (seg.empty()) return error_response(404, "no such endpoint");
  const auto& head = seg[0];
  if (req.method == "GET") {
    if (head == "layers" && seg.size() == 1) return get_layers();
    if (head == "tiles" || head == "filtered") {
      const auto addr = seg.size() >= 2 ? parse_tile_address(seg, 2) : std::nullopt;
      if (!addr) return error_response(404, "malformed tile path");
      return head == "tiles" ? get_tile(seg[1], *addr) : get_filtered(req, seg[1], *addr);
    }
    if (head == "labels" && seg.size() == 1) return get_labels(req);
    if (head == "clusters" && seg.size() == 1) return get_clusters(req);
    if (head == "search" && seg.size() == 1) return get_search(req);
    if (head == "entity" && seg.size() == 2) return get_entity(seg[1]);
    if (head == "stats" && seg.size() == 1) return get_stats();
    if (head == "jobs" && seg.size() == 2) return get_job(seg[1]);
  } else if (req.method == "POST") {
    if (head == "jobs" && seg.size() == 1) return post_job(req);
  } else if (req.method == "DELETE") {
    if (head == "jobs" && seg.size() == 2) return delete_job(seg[1]);
  }
  return error_response(404, "no such endpoint");
}

HttpResponse MapService::get_layers() const {
  json layers = json::array();
  for (const auto& l : data_->layers) {
    layers.push_back({{"name", l.name},
                      {"type", type_name(l.type)},
                      {"zmax", l.info.zmax},
                      {"tile_size", kTileSize},
                      {"points", l.info.point_count}});
  }
  json types = json::array();
  for (EntityType t : kAllEntityTypes) {
    if (!data_->snapshot.of(t).empty()) types.push_back(type_name(t));
  }
  json facets = json::array();
  for (const auto& [name, values] : data_->facets.facets) facets.push_back({{"name", name}, {"values", values.size()}});
  return json_response({{"layers", layers}, {"entity_types", types}, {"facets", facets}});
}

HttpResponse MapService::get_tile(const std::string& layer_name, TileAddress addr) const {
  const auto* layer = find_layer(layer_name);
  if (!layer) return error_response(404, "unknown layer '" + layer_name + "'");
  if (!addr.valid() || addr.z > layer->info.zmax) return error_response(404, "tile address outside the pyramid");
  const auto bytes = read_binary_file(tile_path(layer->dir, addr));
  HttpResponse r;
  r.content_type = "image/png";
  r.body.assign(bytes.begin(), bytes.end());
  r.headers.emplace_back("Cache-Control", "public, max-age=31536000, immutable");
  return r;
}

HttpResponse MapService::get_filtered(const HttpRequest& req, const std::string& layer, TileAddress addr) {
  const auto expr = FilterExpr::parse(req.param("f").value_or(""));
  const auto png = filtered_tile(layer, expr, addr);
  HttpResponse r;
  r.content_type = "image/png";
  r.body.assign(png->begin(), png->end());
  r.headers.emplace_back("Cache-Control", "public, max-age=300");
  return r;
}

HttpResponse MapService::get_labels(const HttpRequest& req) const {
  ViewportQuery q;
  q.bbox = parse_bbox(req.param("bbox"));
  q.zoom = parse_u32(req.param("zoom"), 0, "zoom");
  q.limit = parse_u32(req.param("limit"), 10, "limit");
  if (q.limit == 0) bad_request("limit must be >= 1");
  if (auto types = req.param("types")) {
    for (const auto& name : split(*types, ',')) {
      if (name.empty()) continue;
      const auto t = parse_entity_type(name);
      if (!t) bad_request("unknown entity type '" + name + "'");
      q.types.push_back(*t);
    }
  }
  const auto& s = data_->snapshot;
  json out = json::array();
  for (const auto& h : labels(q)) {
    const auto& e = s.entity(h.id);
    out.push_back({{"id", h.id}, {"type", type_name(h.type)}, {"label", e.label}, {"score", e.score},
                   {"x", e.pos.x}, {"y", e.pos.y}});
  }
  return json_response({{"zoom", q.zoom}, {"labels", out}});
}

HttpResponse MapService::get_clusters(const HttpRequest& req) const {
  const auto bbox = parse_bbox(req.param("bbox"));
  const auto zoom = parse_u32(req.param("zoom"), 0, "zoom");
  const auto& levels = data_->snapshot.levels;
  json out = json::array();
  std::uint32_t level = cluster_level_for_zoom(zoom);
  if (!levels.empty()) {
    level = std::min<std::uint32_t>(level, static_cast<std::uint32_t>(levels.size() - 1));
    const auto& lv = levels[level];
    for (std::size_t c = 0; c < lv.clusters.size(); ++c) {
      const auto& cl = lv.clusters[c];
      if (!bbox.contains(cl.centroid)) continue;
      out.push_back({{"cluster", c}, {"label", cl.label}, {"x", cl.centroid.x}, {"y", cl.centroid.y},
                     {"coverage", cl.coverage}});
    }
  }
  return json_response({{"zoom", zoom}, {"level", level}, {"clusters", out}});
}

HttpResponse MapService::get_search(const HttpRequest& req) const {
  const auto q = to_lower_ascii(trim(req.param("q").value_or("")));
  if (q.size() < 2) bad_request("search query must have at least 2 characters");
  std::optional<EntityType> type;
  if (auto t = req.param("type"); t && !t->empty()) {
    type = parse_entity_type(*t);
    if (!type) bad_request("unknown entity type '" + *t + "'");
  }
  const auto& s = data_->snapshot;
  std::vector<LabelHit> hits;
  auto it = std::lower_bound(search_keys_.begin(), search_keys_.end(), std::make_pair(q, std::uint32_t{0}));
  for (; it != search_keys_.end() && it->first.compare(0, q.size(), q) == 0; ++it) {
    const auto [t, local] = s.locate(it->second);
    if (type && t != *type) continue;
    hits.push_back({it->second, t, s.of(t)[local].score});
  }
  const auto keep = std::min(kSearchCap, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(), better);
  hits.resize(keep);
  json out = json::array();
  for (const auto& h : hits) {
    const auto& e = s.entity(h.id);
    out.push_back({{"id", h.id}, {"type", type_name(h.type)}, {"label", e.label}, {"score", e.score},
                   {"x", e.pos.x}, {"y", e.pos.y}});
  }
  return json_response({{"query", q}, {"results", out}});
}

HttpResponse MapService::get_entity(const std::string& id_text) const {
  const auto id = parse_number<std::uint32_t>(id_text);
  const auto& s = data_->snapshot;
  if (!id || *id >= s.total()) return error_response(404, "unknown entity id '" + id_text + "'");
  const auto [type, local] = s.locate(*id);
  const auto& e = s.of(type)[local];
  json j;
  j["id"] = *id;
  j["type"] = type_name(type);
  j["local_id"] = local;
  j["label"] = e.label;
  j["score"] = e.score;
  j["x"] = e.pos.x;
  j["y"] = e.pos.y;
  j["meta"] = e.meta;
  if (type == EntityType::Article) {
    json terms = json::array();
    for (auto w : e.terms) terms.push_back(s.of(EntityType::Word)[w].label);
    j["terms"] = terms;
  }
  if (type == EntityType::Lab) {
    const auto& rel = s.lab_relations[local];
    json arts = json::array(), auths = json::array();
    for (auto a : rel.articles) arts.push_back(s.global_id(EntityType::Article, a));
    for (auto a : rel.authors) auths.push_back(s.global_id(EntityType::Author, a));
    j["related"] = {{"articles", arts}, {"authors", auths}};
  }
  json neighbors = json::object();
  for (EntityType t : kAllEntityTypes) {
    const auto* nl = s.find_neighbors(type, t);
    if (!nl) continue;
    json list = json::array();
    for (const auto& nb : nl->lists[local]) {
      const auto gid = s.global_id(t, nb.id);
      list.push_back({{"id", gid}, {"label", s.of(t)[nb.id].label}, {"distance", nb.distance},
                      {"x", s.of(t)[nb.id].pos.x}, {"y", s.of(t)[nb.id].pos.y}});
    }
    neighbors[layer_name(t)] = list;
  }
  j["neighbors"] = neighbors;
  return json_response(j);
}

HttpResponse MapService::get_stats() const {
  std::vector<double> times;
  {
    std::lock_guard lock(stats_mu_);
    times = render_ms_;
  }
  std::uint64_t submitted = 0, cancelled = 0, emitted = 0;
  {
    std::lock_guard lock(jobs_mu_);
    for (const auto& [id, job] : jobs_) {
      ++submitted;
      cancelled += job->status.state == JobState::Cancelled;
      emitted += job->status.emitted;
    }
  }
  json j;
  j["cache"] = {{"hits", cache_.hits()}, {"misses", cache_.misses()}, {"size", cache_.size()},
                {"capacity", cache_.capacity()}};
  j["renders"] = renders_.load();
  j["render_ms"] = {{"count", times.size()},
                    {"median", percentile(times, 0.5)},
                    {"p99", percentile(times, 0.99)},
                    {"max", times.empty() ? 0.0 : *std::max_element(times.begin(), times.end())}};
  j["jobs"] = {{"submitted", submitted}, {"cancelled", cancelled}, {"tiles_emitted", emitted}};
  return json_response(j);
}

HttpResponse MapService::post_job(const HttpRequest& req) {
  json body;
  try {
    body = json::parse(req.body);
  } catch (const json::parse_error&) {
    bad_request("job body must be JSON");
  }
  if (!body.is_object() || !body.contains("layer") || !body["layer"].is_string()) bad_request("job needs a layer");
  const auto layer = body["layer"].get<std::string>();
  const auto filter = body.contains("filter") && body["filter"].is_string() ? body["filter"].get<std::string>() : "";
  const auto expr = FilterExpr::parse(filter);
  std::vector<TileAddress> tiles;
  try {
    if (body.contains("tiles")) {
      for (const auto& t : body["tiles"]) {
        tiles.push_back({t.at(0).get<std::uint32_t>(), t.at(1).get<std::uint32_t>(), t.at(2).get<std::uint32_t>()});
      }
    } else {
      BBox b;
      if (body.contains("bbox")) {
        const auto& v = body["bbox"];
        b = {v.at(0).get<double>(), v.at(1).get<double>(), v.at(2).get<double>(), v.at(3).get<double>()};
        if (!(b.x0 < b.x1 && b.y0 < b.y1)) bad_request("bbox must satisfy x0 < x1 and y0 < y1");
        b = {std::clamp(b.x0, 0.0, 1.0), std::clamp(b.y0, 0.0, 1.0), std::clamp(b.x1, 0.0, 1.0), std::clamp(b.y1, 0.0, 1.0)};
      }
      tiles = center_out_tiles(b, body.value("zoom", 0u));
    }
  } catch (const json::exception&) {
    bad_request("job tiles must be [z, x, y] triples, or give bbox and zoom");
  }
  const auto id = submit_job(layer, expr, std::move(tiles));
  const auto st = job(id);
  json t = json::array();
  for (const auto& a : st->tiles) t.push_back({a.z, a.x, a.y});
  return json_response({{"id", id}, {"state", state_name(st->state)}, {"tiles", t}}, 202);
}

HttpResponse MapService::get_job(const std::string& id_text) const {
  const auto id = parse_number<std::uint64_t>(id_text);
  const auto st = id ? job(*id) : std::nullopt;
  if (!st) return error_response(404, "unknown job '" + id_text + "'");
  json tiles = json::array();
  for (std::size_t i = 0; i < st->tiles.size(); ++i) {
    const auto& a = st->tiles[i];
    tiles.push_back({{"z", a.z}, {"x", a.x}, {"y", a.y}, {"done", static_cast<bool>(st->completed[i])}});
  }
  return json_response({{"id", st->id}, {"state", state_name(st->state)}, {"layer", st->layer},
                        {"filter", st->filter}, {"emitted", st->emitted}, {"tiles", tiles}});
}

HttpResponse MapService::delete_job(const std::string& id_text) {
  const auto id = parse_number<std::uint64_t>(id_text);
  if (!id || !cancel_job(*id)) return error_response(404, "unknown job '" + id_text + "'");
  const auto st = job(*id);
  return json_response({{"id", *id}, {"state", state_name(st->state)}, {"emitted", st->emitted}});
}

// ------------------------------------------------------------- HttpServer

struct HttpServer::Impl {
  std::shared_ptr<MapService> service;
  std::string host;
  std::uint16_t port;
  httplib::Server server;
  std::thread thread;
};

HttpServer::HttpServer(std::shared_ptr<MapService> service, std::string host, std::uint16_t port)
    : impl_(std::make_unique<Impl>()) {
  impl_->service = std::move(service);
  impl_->host = std::move(host);
  impl_->port = port;
  auto handler = [svc = impl_->service](const httplib::Request& in, httplib::Response& out) {
    HttpRequest req;
    req.method = in.method;
    req.path = in.path;
    for (const auto& [k, v] : in.params) req.query.emplace(k, v);
    req.body = in.body;
    const auto resp = svc->handle(req);
    out.status = resp.status;
    for (const auto& [k, v] : resp.headers) out.set_header(k, v);
    if (resp.status != 204) out.set_content(resp.body, resp.content_type);
  };
  impl_->server.Get(".*", handler);
  impl_->server.Post(".*", handler);
  impl_->server.Delete(".*", handler);
  impl_->server.Options(".*", handler);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start() {
  int port = impl_->port;
  if (port == 0) {
    port = impl_->server.bind_to_any_port(impl_->host);
  } else if (!impl_->server.bind_to_port(impl_->host, port)) {
    port = -1;
  }
  if (port < 0) fail(ErrorCode::InvalidArgument, "cannot bind " + impl_->host + ":" + std::to_string(impl_->port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port;
}

void HttpServer::run() {
  if (!impl_->server.listen(impl_->host, impl_->port)) {
    fail(ErrorCode::InvalidArgument, "cannot listen on " + impl_->host + ":" + std::to_string(impl_->port));
  }
}

void HttpServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace cartomap
