// Copyright 2026 The tapseg Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <gtest/gtest.h>

#include "cli.hpp"
#include "httplib.h"
#include "json.hpp"
#include "tapseg/evalbench/bench.hpp"
#include "tapseg/pipeline/pipeline.hpp"

namespace tapseg::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome cli(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "tapseg_cli_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const fs::path& dir, const json& doc) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << doc.dump(2);
  return p;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

const json kOracleText = {{"tracker", {{"name", "oracle"}}}, {"pipeline", {{"init_mode", "text"}}}};

TEST(Cli, VersionSchemaAndUsage) {
  const Outcome v = cli({"--version"});
  EXPECT_EQ(v.code, kExitOk);
  EXPECT_EQ(v.out, "tapseg " + version() + "\n");

  const Outcome s = cli({"--print-schema"});
  ASSERT_EQ(s.code, kExitOk);
  const json schema = json::parse(s.out);
  for (const char* section : {"sampling", "tracker", "segmenter", "pipeline", "train", "bench", "service"})
    EXPECT_TRUE(schema.contains(section)) << section;
  EXPECT_EQ(schema["train"]["epochs"], 50);

  EXPECT_EQ(cli({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(cli({"run", "--out", "/tmp/x"}).code, kExitUsage);
  EXPECT_EQ(cli({"run", "-v", "a", "-o", "b", "--points", "12"}).code, kExitUsage);
  EXPECT_EQ(cli({"run", "-v", "a", "-o", "b", "-c", "/no/such/config.json"}).code, kExitUsage);
  EXPECT_EQ(cli({"--help"}).code, kExitOk);
}

TEST(Cli, RunWritesRecordsAndManifest) {
  const fs::path dir = scratch("run");
  ASSERT_EQ(cli({"synth", "-o", (dir / "video").string(), "--seed", "3"}).code, kExitOk);
  const fs::path cfg = write_config(dir, kOracleText);
  const Outcome r = cli({"run", "-c", cfg.string(), "-v", (dir / "video" / "scene.json").string(), "-o",
                         (dir / "out").string(), "--strategy", "kmedoids", "--points", "5", "--seed", "9"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(pipeline::read_results(dir / "out" / "frames").size(), 100u);

  const json manifest = read_json(dir / "out" / "manifest.json");
  EXPECT_EQ(manifest["command"], "run");
  EXPECT_EQ(manifest["version"], version());
  EXPECT_EQ(manifest["seed"], 9);
  EXPECT_EQ(manifest["config"]["sampling"]["strategy"], "kmedoids");
  EXPECT_EQ(manifest["config"]["sampling"]["points_per_instance"], 5);
  EXPECT_EQ(manifest["adapters"]["tracker"]["name"], "oracle");
  EXPECT_TRUE(manifest.contains("started_at"));
  EXPECT_FALSE(fs::exists(dir / "out" / "manifest.json.tmp"));
  const json summary = read_json(dir / "out" / "summary.json");
  EXPECT_EQ(summary["frames"], 100);

  const fs::path frame0 = dir / "out" / "frames" / "frame_000000.json";
  EXPECT_EQ(read_json(frame0)["tracked"][0]["points"].size(), 5u);

  const Outcome missing = cli({"run", "-c", cfg.string(), "-v", (dir / "nope.mp4").string(), "-o",
                               (dir / "out2").string()});
  EXPECT_EQ(missing.code, kExitUsage);
  EXPECT_NE(missing.err.find("video not found"), std::string::npos);
}

TEST(Cli, SeedMakesRunsRepeatable) {
  const fs::path dir = scratch("seed");
  ASSERT_EQ(cli({"synth", "-o", (dir / "video").string(), "--preset", "occlusion", "--frames", "40"}).code, 0);
  json doc = kOracleText;
  doc["tracker"]["name"] = "ncc_block";
  doc["sampling"] = {{"strategy", "random"}};
  const fs::path cfg = write_config(dir, doc);
  std::vector<std::string> dumps;
  for (const char* run : {"a", "b", "c"}) {
    const std::string seed = std::string(run) == "c" ? "2" : "1";
    ASSERT_EQ(cli({"run", "-c", cfg.string(), "-v", (dir / "video" / "frames").string(), "-o",
                   (dir / run).string(), "--seed", seed})
                  .code,
              0);
    std::string all;
    for (const auto& r : pipeline::read_results(dir / run / "frames")) all += pipeline::to_json(r, false).dump();
    dumps.push_back(all);
  }
  EXPECT_EQ(dumps[0], dumps[1]);
  EXPECT_NE(dumps[0], dumps[2]);
}

TEST(Cli, EvalReportsAndAlignment) {
  const fs::path dir = scratch("eval");
  ASSERT_EQ(cli({"synth", "-o", (dir / "video").string(), "--frames", "20"}).code, 0);
  const fs::path cfg = write_config(dir, kOracleText);
  ASSERT_EQ(cli({"run", "-c", cfg.string(), "-v", (dir / "video" / "scene.json").string(), "-o",
                 (dir / "out").string()})
                .code,
            0);
  const Outcome e = cli({"eval", "-r", (dir / "out").string(), "-d", (dir / "video").string()});
  ASSERT_EQ(e.code, kExitOk) << e.err;
  const json report = read_json(dir / "out" / "eval.json");
  EXPECT_DOUBLE_EQ(report["summary"]["mean_iou"].get<double>(), 1.0);
  EXPECT_DOUBLE_EQ(report["summary"]["mean_dice"].get<double>(), 1.0);
  EXPECT_NE(e.out.find("100.0"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "out" / "eval_table.txt"));
  std::ifstream csv(dir / "out" / "per_frame.csv");
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, "frame_index,instance_id,pred_instance,iou,dice");
  int rows = 0;
  for (std::string line; std::getline(csv, line);) rows += !line.empty();
  EXPECT_EQ(rows, 20);

  fs::remove(dir / "out" / "frames" / "frame_000005.json");
  const Outcome bad = cli({"eval", "-r", (dir / "out").string(), "-d", (dir / "video").string()});
  EXPECT_EQ(bad.code, kExitFailure);
  EXPECT_NE(bad.err.find("alignment"), std::string::npos);
  EXPECT_NE(bad.err.find("[5]"), std::string::npos);
}

TEST(Cli, BenchWithStubAdapters) {
  const fs::path dir = scratch("bench");
  ASSERT_EQ(cli({"synth", "-o", (dir / "long").string(), "--frames", "220"}).code, 0);
  ASSERT_EQ(cli({"synth", "-o", (dir / "short").string(), "--frames", "150"}).code, 0);
  const json doc = {{"tracker", {{"name", "stub"}, {"options", {{"sleep_ms", 2.5}}}}},
                    {"segmenter", {{"name", "stub"}, {"options", {{"sleep_ms", 2.5}}}}},
                    {"pipeline", {{"init_mode", "points"}, {"points", {{"1", {{40.5, 60.5}}}}}}},
                    {"bench", {{"device", "cpu-test"}}}};
  const fs::path cfg = write_config(dir, doc);
  const Outcome b = cli({"bench", "-c", cfg.string(), "-v", (dir / "long" / "scene.json").string(), "-o",
                         (dir / "out").string()});
  ASSERT_EQ(b.code, kExitOk) << b.err;
  const json report = read_json(dir / "out" / "bench.json");
  const double p50 = report["latency_ms"]["cpu-test"]["p50"];
  EXPECT_GE(p50, 5.0);
  EXPECT_LE(p50, 7.0);
  EXPECT_EQ(report["measured_frames"], 200);
  EXPECT_EQ(evalbench::read_latency_csv(dir / "out" / "latency.csv").size(), 200u);
  EXPECT_NE(b.out.find("Latency cpu-test (ms)"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "out" / "bench_table.txt"));

  const Outcome shortrun = cli({"bench", "-c", cfg.string(), "-v", (dir / "short" / "scene.json").string(),
                                "-o", (dir / "out2").string()});
  EXPECT_EQ(shortrun.code, kExitFailure);
  EXPECT_NE(shortrun.err.find("insufficient_data"), std::string::npos);
}

TEST(Cli, FinetuneToyFixture) {
  const fs::path dir = scratch("finetune");
  ASSERT_EQ(cli({"synth", "-o", (dir / "toy").string(), "--toy", "8", "--toy-val", "2", "--toy-size", "32"}).code,
            0);
  const json doc = {{"train", {{"epochs", 6}, {"batch_size", 4}, {"lr_init", 0.05}, {"input_hw", {32, 32}}}}};
  const fs::path cfg = write_config(dir, doc);
  const std::string manifest = (dir / "toy" / "manifest.jsonl").string();
  const Outcome f = cli({"finetune", "-c", cfg.string(), "-m", manifest, "-o", (dir / "out").string()});
  ASSERT_EQ(f.code, kExitOk) << f.err;

  std::ifstream csv(dir / "out" / "run-metrics.csv");
  std::string line;
  std::getline(csv, line);
  std::vector<double> totals;
  while (std::getline(csv, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    totals.push_back(std::stod(cells.at(5)));
  }
  ASSERT_EQ(totals.size(), 6u);
  EXPECT_LT(totals.back(), totals.front());

  const json summary = read_json(dir / "out" / "run-summary.json");
  EXPECT_EQ(summary["epochs"], 6);
  EXPECT_TRUE(fs::exists(summary["last_checkpoint"].get<std::string>()));

  const fs::path last = summary["last_checkpoint"].get<std::string>();
  const Outcome resumed = cli({"finetune", "-c", cfg.string(), "-m", manifest, "-o", (dir / "out").string(),
                               "--resume", last.string(), "--epochs", "8"});
  EXPECT_EQ(resumed.code, kExitOk) << resumed.err;
  EXPECT_NE(resumed.out.find("epoch 7"), std::string::npos);
  EXPECT_EQ(resumed.out.find("epoch 6 "), std::string::npos);

  const fs::path bad = dir / "bad.json";
  std::ofstream(bad) << R"({"train": {"freeze": {"prompt_encoder": true}}})";
  const Outcome b = cli({"finetune", "-c", bad.string(), "-m", manifest, "-o", (dir / "bad").string()});
  EXPECT_EQ(b.code, kExitUsage);
  EXPECT_NE(b.err.find("freeze"), std::string::npos);
}

TEST(Cli, AdapterServeMatchesLocalSegmenter) {
  const fs::path dir = scratch("adapter");
  ASSERT_EQ(cli({"synth", "-o", (dir / "video").string(), "--frames", "15"}).code, 0);
  const std::string endpoint = "unix:" + (dir / "seg.sock").string();
  std::thread server([&] {
    const Outcome o = cli({"adapter-serve", "--kind", "segmenter", "--endpoint", endpoint, "--connections", "1"});
    EXPECT_EQ(o.code, kExitOk) << o.err;
  });
  for (int i = 0; i < 200 && !fs::exists(dir / "seg.sock"); ++i)
    std::this_thread::sleep_for(std::chrono::milliseconds(5));

  json clicks = {{"tracker", {{"name", "oracle"}}},
                 {"pipeline", {{"init_mode", "points"}, {"points", {{"1", {{40.5, 60.5}}}}}}}};
  const fs::path local_cfg = dir / "local.json";
  std::ofstream(local_cfg) << clicks.dump();
  clicks["segmenter"] = {{"name", "socket"}, {"options", {{"endpoint", endpoint}}}};
  const fs::path remote_cfg = dir / "remote.json";
  std::ofstream(remote_cfg) << clicks.dump();

  const std::string video = (dir / "video" / "scene.json").string();
  ASSERT_EQ(cli({"run", "-c", local_cfg.string(), "-v", video, "-o", (dir / "local").string()}).code, 0);
  const Outcome remote = cli({"run", "-c", remote_cfg.string(), "-v", video, "-o", (dir / "remote").string()});
  EXPECT_EQ(remote.code, 0) << remote.err;
  server.join();
  const auto a = pipeline::read_results(dir / "local" / "frames");
  const auto b = pipeline::read_results(dir / "remote" / "frames");
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    EXPECT_EQ(pipeline::to_json(a[i], false)["masks"], pipeline::to_json(b[i], false)["masks"]);
}

// Launches the real binary so signal handling is exercised.
pid_t spawn(const std::vector<std::string>& args, const fs::path& log) {
  const pid_t pid = fork();
  if (pid == 0) {
    const int fd = ::open(log.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    dup2(fd, 1);
    dup2(fd, 2);
    std::vector<char*> argv;
    std::string bin = TAPSEG_CLI_BINARY;
    argv.push_back(bin.data());
    std::vector<std::string> copy = args;
    for (auto& a : copy) argv.push_back(a.data());
    argv.push_back(nullptr);
    execv(bin.c_str(), argv.data());
    _exit(127);
  }
  return pid;
}

int wait_exit(pid_t pid) {
  int status = 0;
  waitpid(pid, &status, 0);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

int listening_port(const fs::path& log) {
  for (int i = 0; i < 400; ++i) {
    std::ifstream in(log);
    std::string text((std::istreambuf_iterator<char>(in)), {});
    const auto at = text.find("listening on ");
    if (at != std::string::npos && text.find('\n', at) != std::string::npos)
      return std::stoi(text.substr(text.rfind(':', text.find('\n', at)) + 1));
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  return -1;
}

TEST(Cli, ServeHealthShutdownAndBusyPort) {
  const fs::path dir = scratch("serve");
  const json doc = {{"service", {{"port", 0}, {"results_root", (dir / "results").string()}}}};
  const fs::path cfg = write_config(dir, doc);
  const pid_t pid = spawn({"serve", "-c", cfg.string()}, dir / "serve.log");
  const int port = listening_port(dir / "serve.log");
  ASSERT_GT(port, 0);

  httplib::Client client("127.0.0.1", port);
  auto health = client.Get("/health");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);

  const json session = {{"config",
                         {{"tracker", {{"name", "oracle"}}},
                          {"segmenter", {{"name", "stub"}, {"options", {{"sleep_ms", 40}}}}},
                          {"pipeline", {{"init_mode", "points"}, {"points", {{"1", {{40.5, 60.5}}}}}}}}},
                        {"source", {{"synthetic", "moving_disk"}}}};
  auto created = client.Post("/sessions", session.dump(), "application/json");
  ASSERT_TRUE(created);
  ASSERT_EQ(created->status, 201) << created->body;
  const std::string id = json::parse(created->body)["session_id"];
  std::this_thread::sleep_for(std::chrono::milliseconds(300));

  const pid_t clash = spawn({"serve", "--port", std::to_string(port)}, dir / "clash.log");
  EXPECT_EQ(wait_exit(clash), kExitUsage);

  kill(pid, SIGTERM);
  EXPECT_EQ(wait_exit(pid), kExitOk);
  std::size_t written = 0;
  for (const auto& entry : fs::directory_iterator(dir / "results" / id)) {
    EXPECT_NO_THROW(read_json(entry.path())) << entry.path();
    ++written;
  }
  EXPECT_GT(written, 0u);
  EXPECT_LT(written, 100u);
}

}  // namespace
}  // namespace tapseg::cli
