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

#ifndef CARTOMAP_SERVER_HPP
#define CARTOMAP_SERVER_HPP

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "facets.hpp"
#include "raster.hpp"
#include "snapshot.hpp"

namespace cartomap {

struct ServerConfig {
  std::filesystem::path data_dir;  // run output: snapshot/, layers/, index/
  std::string host = "127.0.0.1";
  std::uint16_t port = 8080;
  std::size_t cache_size = 512;
  std::size_t workers = 0;  // 0: one per hardware thread
  // Cluster level shown at zoom z is zoom_levels[min(z, size - 1)].
  std::vector<std::uint32_t> zoom_levels = {0, 0, 1, 1, 2, 2, 3};
};

struct LayerData {
  std::string name;
  EntityType type = EntityType::Article;
  PyramidInfo info;
  std::filesystem::path dir;
};

// Everything the server reads. Immutable once built.
struct MapData {
  MapSnapshot snapshot;
  FacetIndex facets;
  TileIndex tiles;
  std::vector<LayerData> layers;
  std::vector<Point2> coords;  // by global id

  static std::shared_ptr<const MapData> open(const std::filesystem::path& data_dir);
  static std::shared_ptr<const MapData> assemble(MapSnapshot snapshot, FacetIndex facets, TileIndex tiles,
                                                 std::vector<LayerData> layers);
};

struct HttpRequest {
  std::string method = "GET";
  std::string path;
  std::multimap<std::string, std::string> query;
  std::string body;

  std::optional<std::string> param(const std::string& key) const;
};

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
  std::vector<std::pair<std::string, std::string>> headers;
};

struct BBox {
  double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;
  bool contains(Point2 p) const { return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1; }
};

struct ViewportQuery {
  BBox bbox;
  std::uint32_t zoom = 0;
  std::vector<EntityType> types;  // empty: all types
  std::size_t limit = 10;
};

struct LabelHit {
  std::uint32_t id = 0;  // global
  EntityType type = EntityType::Article;
  double score = 0.0;
  friend bool operator==(const LabelHit&, const LabelHit&) = default;
};

// Bounded LRU keyed by string; safe for concurrent use.
class TileCache {
 public:
  explicit TileCache(std::size_t capacity) : capacity_(capacity) {}
  std::shared_ptr<const std::vector<std::uint8_t>> get(const std::string& key);
  // Keeps an existing entry for the key if one was inserted meanwhile.
  std::shared_ptr<const std::vector<std::uint8_t>> put(const std::string& key, std::vector<std::uint8_t> value);
  std::size_t size() const;
  std::size_t capacity() const { return capacity_; }
  std::uint64_t hits() const { return hits_; }
  std::uint64_t misses() const { return misses_; }

 private:
  using Entry = std::pair<std::string, std::shared_ptr<const std::vector<std::uint8_t>>>;
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::list<Entry> order_;  // front: most recent
  std::unordered_map<std::string, std::list<Entry>::iterator> map_;
  std::atomic<std::uint64_t> hits_{0}, misses_{0};
};

enum class JobState { Queued, Rendering, Done, Cancelled };

struct JobStatus {
  std::uint64_t id = 0;
  JobState state = JobState::Queued;
  std::string layer;
  std::string filter;
  std::vector<TileAddress> tiles;  // render order
  std::vector<bool> completed;
  std::uint64_t emitted = 0;
};

// Tiles overlapping the box at zoom z, nearest to the box centre first.
std::vector<TileAddress> center_out_tiles(const BBox& bbox, std::uint32_t z);

class MapService {
 public:
  MapService(std::shared_ptr<const MapData> data, ServerConfig config);
  ~MapService();
  MapService(const MapService&) = delete;
  MapService& operator=(const MapService&) = delete;

  HttpResponse handle(const HttpRequest& request);

  // Typed entry points behind the HTTP routes.
  std::vector<LabelHit> labels(const ViewportQuery& q) const;
  std::uint32_t cluster_level_for_zoom(std::uint32_t zoom) const;
  // Throws NotFound for bad layers or addresses and InvalidArgument for bad filters.
  std::shared_ptr<const std::vector<std::uint8_t>> filtered_tile(const std::string& layer, const FilterExpr& expr,
                                                                 TileAddress addr);
  std::uint64_t submit_job(const std::string& layer, const FilterExpr& expr, std::vector<TileAddress> tiles);
  std::optional<JobStatus> job(std::uint64_t id) const;
  bool cancel_job(std::uint64_t id);
  // Blocks until the job is done or cancelled.
  void wait_job(std::uint64_t id);

  const TileCache& cache() const { return cache_; }
  const MapData& data() const { return *data_; }
  std::uint64_t renders() const { return renders_; }

 private:
  struct Job;
  struct LabelGrid;

  const LayerData* find_layer(const std::string& name) const;
  CompressedIdSet filter_ids(const FilterExpr& expr);
  void worker_loop();

  HttpResponse route(const HttpRequest& request);
  HttpResponse get_layers() const;
  HttpResponse get_tile(const std::string& layer, TileAddress addr) const;
  HttpResponse get_filtered(const HttpRequest& request, const std::string& layer, TileAddress addr);
  HttpResponse get_labels(const HttpRequest& request) const;
  HttpResponse get_clusters(const HttpRequest& request) const;
  HttpResponse get_search(const HttpRequest& request) const;
  HttpResponse get_entity(const std::string& id) const;
  HttpResponse get_stats() const;
  HttpResponse post_job(const HttpRequest& request);
  HttpResponse get_job(const std::string& id) const;
  HttpResponse delete_job(const std::string& id);

  std::shared_ptr<const MapData> data_;
  ServerConfig config_;
  TileCache cache_;
  std::vector<std::unique_ptr<LabelGrid>> label_grids_;  // per entity type
  std::vector<std::pair<std::string, std::uint32_t>> search_keys_;  // (lowercase label, gid), sorted

  // Small cache of evaluated filters, keyed by canonical text.
  std::mutex filter_mu_;
  std::list<std::pair<std::string, std::shared_ptr<const CompressedIdSet>>> filter_cache_;

  std::atomic<std::uint64_t> renders_{0};
  mutable std::mutex stats_mu_;
  std::vector<double> render_ms_;

  mutable std::mutex jobs_mu_;
  std::condition_variable jobs_cv_;
  std::condition_variable job_done_cv_;
  std::map<std::uint64_t, std::shared_ptr<Job>> jobs_;
  std::deque<std::pair<std::shared_ptr<Job>, std::size_t>> queue_;
  std::uint64_t next_job_ = 1;
  bool stopping_ = false;
  std::vector<std::thread> workers_;
};

// HTTP front end on top of MapService.
class HttpServer {
 public:
  HttpServer(std::shared_ptr<MapService> service, std::string host, std::uint16_t port);
  ~HttpServer();
  // Binds and starts serving on a background thread. Returns the bound port
  // (useful when port 0 was requested).
  int start();
  void stop();
  // Blocks serving on the calling thread.
  void run();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace cartomap

#endif  // CARTOMAP_SERVER_HPP
