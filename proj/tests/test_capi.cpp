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

// Exercises the shared library and the command-line tool as a consumer
// would: only the public C header and the installed binary.

#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "cartomap/cartomap.h"
#include "json.hpp"

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct Scratch {
  fs::path path;
  Scratch() {
    static std::atomic<int> n{0};
    path = fs::temp_directory_path() / ("cartomap_capi_" + std::to_string(::getpid()) + "_" + std::to_string(n++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string take(char* s) {
  std::string out(s ? s : "");
  cm_free(s);
  return out;
}

cm_config* small_config(const fs::path& dir) {
  cm_config* c = nullptr;
  EXPECT_EQ(cm_config_new(&c), CM_OK);
  const std::string sets[] = {"input.path=" + (dir / "corpus.csv").string(),
                              "output=" + (dir / "out").string(),
                              "synth.docs_per_topic=40",
                              "synth.topic_vocab=15",
                              "synth.shared_vocab=20",
                              "vectorize.m_min=3",
                              "embed.d=16",
                              "project.epochs=50",
                              "cluster.ks=[3]",
                              "raster.zmax=1",
                              "server.workers=1"};
  for (const auto& s : sets) EXPECT_EQ(cm_config_set(c, s.c_str()), CM_OK) << cm_last_error();
  return c;
}

TEST(CApi, ConfigRoundTripAndErrors) {
  cm_config* c = nullptr;
  ASSERT_EQ(cm_config_new(&c), CM_OK);
  char* v = nullptr;
  ASSERT_EQ(cm_config_get(c, "knn.k", &v), CM_OK);
  EXPECT_EQ(take(v), "10");
  EXPECT_EQ(cm_config_set(c, "knn.k=12"), CM_OK);
  ASSERT_EQ(cm_config_get(c, "knn.k", &v), CM_OK);
  EXPECT_EQ(take(v), "12");
  EXPECT_EQ(cm_config_set(c, "knn.nope=1"), CM_ERR_INVALID_ARGUMENT);
  EXPECT_NE(std::string(cm_last_error()).find("knn.nope"), std::string::npos);
  EXPECT_EQ(cm_config_set(nullptr, "knn.k=1"), CM_ERR_INVALID_ARGUMENT);
  ASSERT_EQ(cm_config_to_json(c, &v), CM_OK);
  EXPECT_EQ(json::parse(take(v))["knn"]["k"], 12);
  cm_config_free(c);

  cm_config* missing = nullptr;
  EXPECT_EQ(cm_config_load("/nonexistent/cartomap.json", &missing), CM_ERR_NOT_FOUND);
  EXPECT_EQ(missing, nullptr);
  EXPECT_STREQ(cm_status_name(CM_ERR_MISSING_STAGE), "missing stage");
  size_t n = 0;
  const char* const* names = cm_stage_names(&n);
  ASSERT_EQ(n, 9u);
  EXPECT_STREQ(names[0], "ingest");
  EXPECT_STREQ(names[8], "index");
}

TEST(CApi, PipelineAndServerRequests) {
  Scratch dir;
  cm_config* c = small_config(dir.path);
  EXPECT_EQ(cm_run(c, "vectorize", 0, nullptr, nullptr, nullptr), CM_ERR_MISSING_STAGE);
  EXPECT_NE(std::string(cm_last_error()).find("ingest"), std::string::npos);
  EXPECT_EQ(cm_run(c, "bogus", 0, nullptr, nullptr, nullptr), CM_ERR_INVALID_ARGUMENT);
  ASSERT_EQ(cm_synth(c, (dir.path / "corpus.csv").c_str()), CM_OK);

  int lines = 0;
  char* report = nullptr;
  ASSERT_EQ(cm_run(c, "run-all", 0, [](const char*, void* u) { ++*static_cast<int*>(u); }, &lines, &report), CM_OK)
      << cm_last_error();
  const auto r = json::parse(take(report));
  ASSERT_EQ(r.size(), 9u);
  EXPECT_TRUE(r[0]["executed"].get<bool>());
  EXPECT_GT(lines, 0);
  ASSERT_EQ(cm_run(c, "knn", 0, nullptr, nullptr, &report), CM_OK);
  EXPECT_FALSE(json::parse(take(report))[0]["executed"].get<bool>());

  cm_server* s = nullptr;
  ASSERT_EQ(cm_server_open(c, (dir.path / "out").c_str(), &s), CM_OK) << cm_last_error();
  int status = 0;
  char* type = nullptr;
  uint8_t* data = nullptr;
  size_t size = 0;
  ASSERT_EQ(cm_server_request(s, "GET", "/labels?bbox=0,0,1,1&limit=3&types=articles", nullptr, &status, &type, &data,
                              &size),
            CM_OK);
  EXPECT_EQ(status, 200);
  EXPECT_EQ(take(type), "application/json");
  const auto labels = json::parse(std::string(reinterpret_cast<char*>(data), size));
  cm_free(data);
  EXPECT_EQ(labels["labels"].size(), 3u);

  ASSERT_EQ(cm_server_request(s, "GET", "/filtered/articles/1/0/0.png?f=type%3Darticle", nullptr, &status, &type,
                              &data, &size),
            CM_OK);
  EXPECT_EQ(status, 200);
  EXPECT_EQ(take(type), "image/png");
  ASSERT_GT(size, 8u);
  EXPECT_EQ(data[1], 'P');
  cm_free(data);

  ASSERT_EQ(cm_server_request(s, "GET", "/entity/99999999", nullptr, &status, nullptr, nullptr, nullptr), CM_OK);
  EXPECT_EQ(status, 404);
  int port = 0;
  cm_config_set(c, "server.port=0");
  cm_server_free(s);
  ASSERT_EQ(cm_server_open(c, (dir.path / "out").c_str(), &s), CM_OK);
  ASSERT_EQ(cm_server_start(s, &port), CM_OK) << cm_last_error();
  EXPECT_GT(port, 0);
  EXPECT_EQ(cm_server_stop(s), CM_OK);
  cm_server_free(s);

  cm_server* none = nullptr;
  EXPECT_NE(cm_server_open(c, (dir.path / "nowhere").c_str(), &none), CM_OK);
  cm_config_free(c);
}

int run_cli(const std::string& args, std::string* output = nullptr) {
  const std::string cmd = std::string(CARTOMAP_CLI) + " " + args + " 2>&1";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  std::string out;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
  const int status = ::pclose(pipe);
  if (output) *output = out;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodesAndEndToEnd) {
  Scratch dir;
  const auto csv = (dir.path / "corpus.csv").string();
  const auto out = (dir.path / "out").string();
  std::string text;
  EXPECT_EQ(run_cli("--help", &text), 0);
  EXPECT_NE(text.find("run-all"), std::string::npos);
  EXPECT_EQ(run_cli("", &text), 1);
  EXPECT_EQ(run_cli("frobnicate"), 1);
  EXPECT_EQ(run_cli("vectorize -o " + out, &text), 1);
  EXPECT_NE(text.find("ingest"), std::string::npos);
  EXPECT_EQ(run_cli("config --set knn.bogus=1", &text), 1);
  EXPECT_NE(text.find("knn.bogus"), std::string::npos);

  const std::string cfg = (dir.path / "c.json").string();
  std::ofstream(cfg) << R"({"vectorize": {"m_min": 3}, "embed": {"d": 16}, "cluster": {"ks": [3]},
                           "raster": {"zmax": 1}, "project": {"epochs": 40}, "knn": {"k": 5}})";
  EXPECT_EQ(run_cli("config -c " + cfg + " --set knn.k=7", &text), 0);
  EXPECT_EQ(json::parse(text)["knn"]["k"], 7);  // flag wins over file

  EXPECT_EQ(run_cli("synth -q --docs-per-topic 30 --topic-vocab 12 --shared-vocab 15 -i " + csv), 0);
  EXPECT_TRUE(fs::exists(csv));
  EXPECT_EQ(run_cli("run-all -c " + cfg + " -i " + csv + " -o " + out, &text), 0) << text;
  EXPECT_NE(text.find("LSA"), std::string::npos);
  EXPECT_TRUE(fs::exists(fs::path(out) / "layers/articles/1/1/1.png"));
  EXPECT_EQ(run_cli("run-all -c " + cfg + " -i " + csv + " -o " + out, &text), 0);
  EXPECT_NE(text.find("skipped"), std::string::npos);
  EXPECT_EQ(run_cli("serve -q --data " + (dir.path / "missing").string()), 1);
}

}  // namespace
