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

#include "cartomap/cartomap.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

// Eigen must come before httplib, whose resolver headers define _res.
#include "pipeline.hpp"
#include "server.hpp"
#include "httplib.h"

struct cm_config {
  cartomap::PipelineConfig config;
};

struct cm_server {
  std::shared_ptr<cartomap::MapService> service;
  std::unique_ptr<cartomap::HttpServer> http;
};

namespace {

thread_local std::string g_last_error;

cm_status to_status(cartomap::ErrorCode code) {
  switch (code) {
    case cartomap::ErrorCode::InvalidArgument: return CM_ERR_INVALID_ARGUMENT;
    case cartomap::ErrorCode::NotFound: return CM_ERR_NOT_FOUND;
    case cartomap::ErrorCode::Format: return CM_ERR_FORMAT;
    case cartomap::ErrorCode::MissingStage: return CM_ERR_MISSING_STAGE;
    case cartomap::ErrorCode::Internal: return CM_ERR_INTERNAL;
  }
  return CM_ERR_INTERNAL;
}

template <typename F>
cm_status guarded(F&& f) {
  g_last_error.clear();
  try {
    f();
    return CM_OK;
  } catch (const cartomap::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown failure";
  }
  return CM_ERR_INTERNAL;
}

void need(const void* p, const char* name) {
  if (!p) cartomap::fail(cartomap::ErrorCode::InvalidArgument, std::string(name) + " must not be NULL");
}

char* dup_string(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* cm_version(void) { return "0.1.0"; }

const char* cm_last_error(void) { return g_last_error.c_str(); }

const char* cm_status_name(cm_status status) {
  switch (status) {
    case CM_OK: return "ok";
    case CM_ERR_INVALID_ARGUMENT: return "invalid argument";
    case CM_ERR_NOT_FOUND: return "not found";
    case CM_ERR_FORMAT: return "format error";
    case CM_ERR_MISSING_STAGE: return "missing stage";
    case CM_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void cm_free(void* ptr) { std::free(ptr); }

cm_status cm_config_new(cm_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = new cm_config{};
  });
}

cm_status cm_config_load(const char* path, cm_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new cm_config{cartomap::PipelineConfig::from_file(path)};
  });
}

void cm_config_free(cm_config* config) { delete config; }

cm_status cm_config_set(cm_config* config, const char* assignment) {
  return guarded([&] {
    need(config, "config");
    need(assignment, "assignment");
    config->config.set(assignment);
  });
}

cm_status cm_config_to_json(const cm_config* config, char** out) {
  return guarded([&] {
    need(config, "config");
    need(out, "out");
    *out = dup_string(config->config.tree().dump(2));
  });
}

cm_status cm_config_get(const cm_config* config, const char* key, char** out) {
  return guarded([&] {
    need(config, "config");
    need(key, "key");
    need(out, "out");
    *out = dup_string(config->config.at(key).dump());
  });
}

const char* const* cm_stage_names(size_t* count) {
  static const char* const names[] = {"ingest", "vectorize", "embed",  "knn",  "project",
                                      "cluster", "export",    "raster", "index"};
  if (count) *count = sizeof(names) / sizeof(names[0]);
  return names;
}

cm_status cm_run(const cm_config* config, const char* stage, int force, cm_log_fn log, void* user, char** report) {
  return guarded([&] {
    need(config, "config");
    need(stage, "stage");
    cartomap::LogSink sink;
    if (log) sink = [log, user](const std::string& m) { log(m.c_str(), user); };
    cartomap::Pipeline pipeline(config->config, sink);
    std::vector<cartomap::StageReport> reports;
    if (std::string_view(stage) == "run-all") {
      reports = pipeline.run_all(force != 0);
    } else {
      const auto s = cartomap::parse_stage(stage);
      if (!s) cartomap::fail(cartomap::ErrorCode::InvalidArgument, "unknown stage '" + std::string(stage) + "'");
      reports.push_back(pipeline.run(*s, force != 0));
    }
    if (report) {
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& r : reports) {
        nlohmann::json timings = nlohmann::json::object();
        for (const auto& [k, v] : r.timings) timings[k] = v;
        arr.push_back({{"stage", cartomap::stage_name(r.stage)},
                       {"executed", r.executed},
                       {"seconds", r.seconds},
                       {"timings", timings}});
      }
      *report = dup_string(arr.dump());
    }
  });
}

cm_status cm_synth(const cm_config* config, const char* csv_path) {
  return guarded([&] {
    need(config, "config");
    need(csv_path, "csv_path");
    cartomap::write_synth_corpus(config->config, csv_path);
  });
}

cm_status cm_server_open(const cm_config* config, const char* data_dir, cm_server** out) {
  return guarded([&] {
    need(config, "config");
    need(data_dir, "data_dir");
    need(out, "out");
    const auto& c = config->config;
    cartomap::ServerConfig sc;
    sc.data_dir = data_dir;
    sc.host = c.at("server.host").get<std::string>();
    const auto port = c.at("server.port").get<std::uint64_t>();
    if (port > 65535) cartomap::fail(cartomap::ErrorCode::InvalidArgument, "server.port must be at most 65535");
    sc.port = static_cast<std::uint16_t>(port);
    sc.cache_size = c.at("server.cache_size").get<std::size_t>();
    sc.workers = c.at("server.workers").get<std::size_t>();
    auto server = std::make_unique<cm_server>();
    server->service = std::make_shared<cartomap::MapService>(cartomap::MapData::open(data_dir), sc);
    server->http = std::make_unique<cartomap::HttpServer>(server->service, sc.host, sc.port);
    *out = server.release();
  });
}

void cm_server_free(cm_server* server) {
  if (!server) return;
  server->http.reset();
  delete server;
}

cm_status cm_server_start(cm_server* server, int* port) {
  return guarded([&] {
    need(server, "server");
    const int bound = server->http->start();
    if (port) *port = bound;
  });
}

cm_status cm_server_run(cm_server* server) {
  return guarded([&] {
    need(server, "server");
    server->http->run();
  });
}

cm_status cm_server_stop(cm_server* server) {
  return guarded([&] {
    need(server, "server");
    server->http->stop();
  });
}

cm_status cm_server_request(cm_server* server, const char* method, const char* target, const char* body,
                            int* http_status, char** content_type, uint8_t** data, size_t* size) {
  return guarded([&] {
    need(server, "server");
    need(method, "method");
    need(target, "target");
    cartomap::HttpRequest req;
    req.method = method;
    std::string t(target);
    const auto q = t.find('?');
    req.path = httplib::detail::decode_url(t.substr(0, q), false);
    if (q != std::string::npos) {
      httplib::Params params;
      httplib::detail::parse_query_text(t.substr(q + 1), params);
      for (const auto& [k, v] : params) req.query.emplace(k, v);
    }
    if (body) req.body = body;
    const auto resp = server->service->handle(req);
    if (http_status) *http_status = resp.status;
    if (content_type) *content_type = dup_string(resp.content_type);
    if (data) {
      *data = static_cast<uint8_t*>(std::malloc(resp.body.size() + 1));
      if (!*data) throw std::bad_alloc();
      std::memcpy(*data, resp.body.data(), resp.body.size());
      (*data)[resp.body.size()] = 0;
    }
    if (size) *size = resp.body.size();
  });
}

}  // extern "C"
