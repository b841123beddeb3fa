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

#include "cli.hpp"

#include <pthread.h>
#include <signal.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

#include "CLI11.hpp"
#include "tapseg/core/error.hpp"
#include "tapseg/evalbench/bench.hpp"
#include "tapseg/evalbench/dataset.hpp"
#include "tapseg/evalbench/metrics.hpp"
#include "tapseg/finetune/data.hpp"
#include "tapseg/finetune/toy.hpp"
#include "tapseg/finetune/train.hpp"
#include "tapseg/io/image_io.hpp"
#include "tapseg/io/line_channel.hpp"
#include "tapseg/pipeline/adapters.hpp"
#include "tapseg/pipeline/pipeline.hpp"
#include "tapseg/segmenters/socket_segmenter.hpp"
#include "tapseg/service/server.hpp"
#include "tapseg/synth/scene.hpp"
#include "tapseg/trackers/socket_tracker.hpp"

#ifndef TAPSEG_VERSION
#define TAPSEG_VERSION "0.0.0"
#endif

namespace tapseg::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string version() { return TAPSEG_VERSION; }

json config_schema() {
  json doc = pipeline::to_json(pipeline::PipelineConfig{});
  doc["train"] = finetune::to_json(finetune::TrainConfig{});
  const evalbench::BenchOptions bench;
  doc["bench"] = {{"warmup_frames", bench.warmup_frames},
                  {"min_measured_frames", bench.min_measured_frames},
                  {"device", bench.device}};
  const service::ServiceConfig svc;
  doc["service"] = {{"host", svc.host},
                    {"port", svc.port},
                    {"results_root", nullptr},
                    {"decode_command", svc.decode_command},
                    {"worker_threads", svc.worker_threads}};
  return doc;
}

namespace {

// Flag values shared by the subcommands; unset optionals leave the config
// document untouched.
struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
};

json load_document(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  require(in.good(), ErrorCode::kConfiguration, "cannot read config " + path);
  try {
    json doc = json::parse(in);
    require(doc.is_object(), ErrorCode::kConfiguration, path + ": config must be a JSON object");
    return doc;
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kConfiguration, path + ": " + e.what());
  }
}

void apply_seed(json& doc, const std::optional<std::uint64_t>& seed) {
  if (!seed) return;
  doc["sampling"]["seed"] = *seed;
  if (doc.contains("train")) doc["train"]["seed"] = *seed;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    require(out.good(), ErrorCode::kIo, "cannot write " + tmp.string());
    out << content;
    out.flush();
    require(out.good(), ErrorCode::kIo, "short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

void write_json(const fs::path& path, const json& j) { write_atomic(path, j.dump(2) + "\n"); }

// Snapshot of what a command is about to do. Written once, before work starts.
void write_run_manifest(const fs::path& out_dir, const std::string& command, const json& doc,
                        const std::vector<std::string>& args) {
  json adapters = json::object();
  for (const char* section : {"tracker", "segmenter"})
    if (doc.contains(section)) adapters[section] = doc[section];
  json seed = nullptr;
  if (doc.contains("sampling") && doc["sampling"].contains("seed")) seed = doc["sampling"]["seed"];
  write_json(out_dir / "manifest.json", {{"tool", "tapseg"},
                                         {"version", version()},
                                         {"command", command},
                                         {"args", args},
                                         {"seed", seed},
                                         {"config", doc},
                                         {"adapters", adapters},
                                         {"started_at", utc_now()},
                                         {"output_dir", fs::absolute(out_dir).string()}});
}

struct OpenedVideo {
  std::unique_ptr<pipeline::VideoSource> source;
  std::shared_ptr<const trackers::MotionField> motion;
};

OpenedVideo open_video(const std::string& path, const std::string& decode_command) {
  require(fs::exists(path), ErrorCode::kConfiguration, "video not found: " + path);
  OpenedVideo v;
  v.source = pipeline::open_source(path, decode_command);
  if (const auto* syn = dynamic_cast<const pipeline::SyntheticSource*>(v.source.get()))
    v.motion = synth::motion_field(syn->scene());
  return v;
}

std::unique_ptr<pipeline::Pipeline> build_pipeline(const pipeline::PipelineConfig& config,
                                                   const std::shared_ptr<const trackers::MotionField>& motion) {
  return std::make_unique<pipeline::Pipeline>(config, pipeline::make_tracker(config.tracker, {motion}),
                                              pipeline::make_segmenter(config.segmenter));
}

fs::path results_dir_of(const fs::path& dir) { return fs::is_directory(dir / "frames") ? dir / "frames" : dir; }

// ---------------------------------------------------------------- run

struct RunArgs {
  Common common;
  std::string video;
  std::string out_dir;
  bool overlays = false;
  std::string strategy;
  int points = 0;
  std::string tracker;
  std::string segmenter;
  std::string decode_command = pipeline::DecodeCommandSource::kDefaultCommand;
};

int cmd_run(const RunArgs& a, const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  json doc = load_document(a.common.config_path);
  apply_seed(doc, a.common.seed);
  if (!a.strategy.empty()) doc["sampling"]["strategy"] = a.strategy;
  if (a.points > 0) doc["sampling"]["points_per_instance"] = a.points;
  if (!a.tracker.empty()) doc["tracker"]["name"] = a.tracker;
  if (!a.segmenter.empty()) doc["segmenter"]["name"] = a.segmenter;
  const pipeline::PipelineConfig config = pipeline::config_from_json(doc);
  OpenedVideo video = open_video(a.video, a.decode_command);
  auto pipe = build_pipeline(config, video.motion);

  const fs::path out_dir = a.out_dir;
  fs::create_directories(out_dir / "frames");
  json effective = doc;
  const json resolved = pipeline::to_json(config);
  for (const auto& [key, value] : resolved.items()) effective[key] = value;
  write_run_manifest(out_dir, "run", effective, args);

  const pipeline::ResultWriter writer(out_dir / "frames", a.overlays);
  const pipeline::RunSummary summary = pipeline::run(*video.source, *pipe, writer);
  json s = pipeline::to_json(summary);
  s["finished_at"] = utc_now();
  s["video"] = video.source->describe();
  write_json(out_dir / "summary.json", s);
  if (summary.error) {
    err << "run failed";
    if (summary.failed_frame) err << " at frame " << *summary.failed_frame;
    err << ": " << *summary.error << "\n";
    return kExitFailure;
  }
  char line[160];
  std::snprintf(line, sizeof line, "%lld frames -> %s (p50 %.2f ms/frame)\n",
                static_cast<long long>(summary.frames), (out_dir / "frames").c_str(), summary.total.p50);
  out << line;
  return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string results;
  std::string dataset;
  std::string out_dir;
  std::string method = "tapseg";
  std::string encoding = "palette";
  std::string frames_dir = "frames";
  std::string masks_dir = "masks";
  bool allow_unlabeled = false;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  evalbench::DatasetLayout layout;
  layout.frames_dir = a.frames_dir;
  layout.masks_dir = a.masks_dir;
  layout.mask_encoding = evalbench::mask_encoding_from_string(a.encoding);
  const evalbench::DatasetHandle data = evalbench::ingest_dataset(a.dataset, layout);
  const std::vector<pipeline::FrameResult> results = pipeline::read_results(results_dir_of(a.results));
  const evalbench::EvalResult r =
      evalbench::evaluate_run(results, data.load_ground_truth(), {a.allow_unlabeled});

  const fs::path out_dir = a.out_dir.empty() ? fs::path(a.results) : fs::path(a.out_dir);
  fs::create_directories(out_dir);
  evalbench::BenchReport report;
  report.method = a.method;
  report.dataset = fs::path(a.dataset).filename().string();
  if (report.dataset.empty()) report.dataset = fs::path(a.dataset).parent_path().filename().string();
  report.mean_iou = r.summary.mean_iou;
  report.mean_dice = r.summary.mean_dice;
  const std::string table = evalbench::format_accuracy_table({&report, 1});

  write_json(out_dir / "eval.json", {{"method", report.method},
                                     {"dataset", report.dataset},
                                     {"summary", evalbench::to_json(r.summary)},
                                     {"dataset_layout", evalbench::to_json(data)["layout"]}});
  write_atomic(out_dir / "eval_table.txt", table);
  std::string csv = "frame_index,instance_id,pred_instance,iou,dice\n";
  char row[160];
  for (const auto& rec : r.records) {
    const std::string gt = rec.gt_instance ? std::to_string(*rec.gt_instance) : "binary";
    const std::string pred = rec.pred_instance ? std::to_string(*rec.pred_instance) : "";
    std::snprintf(row, sizeof row, "%lld,%s,%s,%.17g,%.17g\n", static_cast<long long>(rec.frame_index),
                  gt.c_str(), pred.c_str(), rec.iou, rec.dice);
    csv += row;
  }
  write_atomic(out_dir / "per_frame.csv", csv);
  out << table;
  return kExitOk;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
  Common common;
  std::string video;
  std::string out_dir;
  std::string device;
  std::string method = "tapseg";
  int warmup = -1;
  int min_frames = -1;
  std::string decode_command = pipeline::DecodeCommandSource::kDefaultCommand;
};

int cmd_bench(const BenchArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  json doc = load_document(a.common.config_path);
  apply_seed(doc, a.common.seed);
  const pipeline::PipelineConfig config = pipeline::config_from_json(doc);
  evalbench::BenchOptions opts;
  try {
    const json b = doc.value("bench", json::object());
    opts.warmup_frames = b.value("warmup_frames", opts.warmup_frames);
    opts.min_measured_frames = b.value("min_measured_frames", opts.min_measured_frames);
    opts.device = b.value("device", opts.device);
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfiguration, std::string("bench: ") + e.what());
  }
  if (a.warmup >= 0) opts.warmup_frames = a.warmup;
  if (a.min_frames >= 0) opts.min_measured_frames = a.min_frames;
  if (!a.device.empty()) opts.device = a.device;

  OpenedVideo video = open_video(a.video, a.decode_command);
  const fs::path out_dir = a.out_dir;
  fs::create_directories(out_dir);
  write_run_manifest(out_dir, "bench", doc, args);
  opts.raw_csv = out_dir / "latency.csv";

  const evalbench::RssSample baseline = evalbench::sample_rss();
  const auto segmenter = pipeline::make_segmenter(config.segmenter);
  const auto tracker = pipeline::make_tracker(config.tracker, {video.motion});
  const evalbench::PipelineFactory factory = [&] {
    return std::make_unique<pipeline::Pipeline>(config, tracker, segmenter);
  };
  const evalbench::LatencyBench lb = evalbench::bench_latency(factory, *video.source, opts);

  evalbench::BenchReport report;
  report.method = a.method;
  report.dataset = video.source->describe();
  report.latency_ms[lb.device] = lb.total;
  report.memory = evalbench::inference_memory(segmenter.get(), baseline);
  try {
    report.learnable_params_m = evalbench::count_learnable_params(*segmenter, finetune::FreezeMap{});
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kCapability) throw;
  }
  json j = evalbench::to_json(report);
  j.erase("mean_iou");
  j.erase("mean_dice");
  j["device"] = lb.device;
  j["warmup_frames"] = lb.warmup_frames;
  j["measured_frames"] = lb.measured.size();
  j["stages_ms"] = {{"track", to_json(lb.track)}, {"segment", to_json(lb.segment)}, {"total", to_json(lb.total)}};
  j["raw_csv"] = opts.raw_csv->string();
  write_json(out_dir / "bench.json", j);
  const std::string table = evalbench::format_efficiency_table({&report, 1});
  write_atomic(out_dir / "bench_table.txt", table);
  out << table;
  return kExitOk;
}

// ---------------------------------------------------------------- finetune

struct FinetuneArgs {
  Common common;
  std::string manifest;
  std::string out_dir;
  std::string run_id = "run";
  std::string resume;
  int epochs = 0;
};

int cmd_finetune(const FinetuneArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  json doc = load_document(a.common.config_path);
  json train_doc = doc.value("train", json::object());
  if (a.common.seed) train_doc["seed"] = *a.common.seed;
  if (a.epochs > 0) train_doc["epochs"] = a.epochs;
  const finetune::TrainConfig config = finetune::train_config_from_json(train_doc);
  doc["train"] = finetune::to_json(config);

  const finetune::Dataset data =
      finetune::load_dataset(a.manifest, config.seed, config.input_hw, config.points_per_prompt);
  const fs::path out_dir = a.out_dir;
  fs::create_directories(out_dir);
  write_run_manifest(out_dir, "finetune", doc, args);

  finetune::ToyPromptSegmenter model(config.seed);
  finetune::TrainOptions opts;
  opts.out_dir = out_dir;
  opts.run_id = a.run_id;
  if (!a.resume.empty()) opts.resume_from = fs::path(a.resume);
  opts.on_epoch = [&out](const finetune::EpochMetrics& m) {
    char line[200];
    std::snprintf(line, sizeof line, "epoch %d  step %lld  lr %.3g  loss %.6f", m.epoch,
                  static_cast<long long>(m.step), m.lr, m.mean_loss.total);
    out << line;
    if (m.val_dice) {
      std::snprintf(line, sizeof line, "  val_dice %.4f", *m.val_dice);
      out << line;
    }
    out << "\n";
  };
  const finetune::TrainResult r = finetune::train(model, data, config, opts);
  write_json(out_dir / (a.run_id + "-summary.json"),
             {{"epochs", r.epochs.size()},
              {"total_steps", r.total_steps},
              {"metrics_csv", r.metrics_csv.string()},
              {"last_checkpoint", r.last_checkpoint.string()},
              {"best_checkpoint", r.best_checkpoint.string()},
              {"best_epoch", r.best_epoch},
              {"skipped_regions", data.skipped.size()},
              {"finished_at", utc_now()}});
  return kExitOk;
}

// ---------------------------------------------------------------- serve

struct ServeArgs {
  Common common;
  std::string host;
  int port = -1;
  std::string results_root;
};

int cmd_serve(const ServeArgs& a, std::ostream& out, std::ostream& err) {
  const json doc = load_document(a.common.config_path);
  service::ServiceConfig config = service::service_config_from_json(doc);
  if (!a.host.empty()) config.host = a.host;
  if (a.port >= 0) config.port = a.port;
  if (!a.results_root.empty()) config.results_root = fs::path(a.results_root);

  // Worker threads inherit this mask, so only sigwait below sees the signals.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  service::Service svc(config);
  try {
    svc.bind();
  } catch (const Error& e) {
    pthread_sigmask(SIG_UNBLOCK, &signals, nullptr);
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  std::thread server([&svc] { svc.serve(); });
  out << "listening on " << config.host << ":" << svc.port() << std::endl;
  int received = 0;
  sigwait(&signals, &received);
  out << "shutting down (" << (received == SIGINT ? "SIGINT" : "SIGTERM") << ")" << std::endl;
  svc.stop();
  server.join();
  pthread_sigmask(SIG_UNBLOCK, &signals, nullptr);
  return kExitOk;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  Common common;
  std::string preset = "moving_disk";
  std::string out_dir;
  std::int64_t frames = 0;
  int toy = 0;
  int toy_val = 0;
  int toy_size = 64;
};

synth::Scene preset_scene(const std::string& name, std::uint64_t seed) {
  if (name == "moving_disk") return synth::moving_disk_scene(seed);
  if (name == "occlusion") return synth::occlusion_scene(seed);
  if (name == "two_object") return synth::two_object_scene(seed);
  if (name == "panning") return synth::panning_scene(2.0, 1.0, 100, seed);
  fail(ErrorCode::kConfiguration, "unknown preset '" + name + "'");
}

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  const std::uint64_t seed = a.common.seed.value_or(0);
  const fs::path dir = a.out_dir;
  fs::create_directories(dir);
  if (a.toy > 0) {
    fs::create_directories(dir / "images");
    fs::create_directories(dir / "masks");
    const Size hw{a.toy_size, a.toy_size};
    const auto examples = finetune::toy_examples(a.toy + a.toy_val, hw, seed);
    std::vector<finetune::ManifestEntry> entries;
    char name[64];
    for (std::size_t i = 0; i < examples.size(); ++i) {
      std::snprintf(name, sizeof name, "%06zu.png", i);
      io::write_frame_png(dir / "images" / name, examples[i].image);
      io::write_palette_mask_png(dir / "masks" / name, examples[i].masks);
      entries.push_back({fs::path("images") / name, fs::path("masks") / name, finetune::LabelKind::kInstance,
                         static_cast<int>(i) < a.toy ? "train" : "val"});
    }
    finetune::write_manifest(dir / "manifest.jsonl", entries);
    out << "wrote " << entries.size() << " samples to " << (dir / "manifest.jsonl").string() << "\n";
    return kExitOk;
  }
  synth::Scene scene = preset_scene(a.preset, seed);
  if (a.frames > 0) scene.num_frames = a.frames;
  write_json(dir / "scene.json", synth::to_json(scene));
  fs::create_directories(dir / "frames");
  fs::create_directories(dir / "masks");
  char name[64];
  for (std::int64_t t = 0; t < scene.num_frames; ++t) {
    std::snprintf(name, sizeof name, "frame_%06lld.png", static_cast<long long>(t));
    io::write_frame_png(dir / "frames" / name, scene.render(t));
    io::write_palette_mask_png(dir / "masks" / name, scene.ground_truth(t));
  }
  out << "wrote " << scene.num_frames << " frames of '" << a.preset << "' to " << dir.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- adapter-serve

struct AdapterServeArgs {
  Common common;
  std::string kind;
  std::string endpoint;
  int connections = 0;  // 0 serves forever
};

int cmd_adapter_serve(const AdapterServeArgs& a, std::ostream& out) {
  const pipeline::PipelineConfig config = pipeline::config_from_json(load_document(a.common.config_path));
  std::shared_ptr<const trackers::TrackerAdapter> tracker;
  std::shared_ptr<const segmenters::SegmenterAdapter> segmenter;
  if (a.kind == "tracker") {
    require(config.tracker.name != "oracle" && config.tracker.name != "socket", ErrorCode::kConfiguration,
            "adapter-serve: tracker '" + config.tracker.name + "' cannot be served");
    tracker = pipeline::make_tracker(config.tracker);
  } else {
    require(config.segmenter.name != "socket", ErrorCode::kConfiguration,
            "adapter-serve: a socket segmenter cannot be served");
    segmenter = pipeline::make_segmenter(config.segmenter);
  }
  io::LineListener listener(a.endpoint);
  out << "serving " << a.kind << " '" << (tracker ? tracker->name() : segmenter->name()) << "' on "
      << listener.endpoint() << std::endl;
  std::vector<std::thread> workers;
  for (int served = 0; a.connections == 0 || served < a.connections; ++served) {
    io::LineChannel channel = listener.accept();
    workers.emplace_back([tracker, segmenter, window = config.window_size, ch = std::move(channel)]() mutable {
      try {
        if (tracker) trackers::serve_tracker(*tracker, ch, window);
        else segmenters::serve_segmenter(*segmenter, ch);
      } catch (const std::exception& e) {
        std::cerr << "adapter-serve: connection ended: " << e.what() << "\n";
      }
    });
  }
  for (auto& w : workers) w.join();
  return kExitOk;
}

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::kConfiguration:
    case ErrorCode::kInvalidArgument:
      return kExitUsage;
    default:
      return kExitFailure;
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Point-tracking video segmentation toolkit", "tapseg"};
  app.set_version_flag("--version", "tapseg " + version());
  bool print_schema = false;
  app.add_flag("--print-schema", print_schema, "Print the default configuration document and exit");
  app.require_subcommand(0, 1);

  const auto add_common = [](CLI::App* sub, Common& c) {
    sub->add_option("-c,--config", c.config_path, "Configuration document (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--seed", c.seed, "Seed for every random choice");
  };

  RunArgs run_args;
  CLI::App* run = app.add_subcommand("run", "Segment a video offline");
  add_common(run, run_args.common);
  run->add_option("-v,--video", run_args.video, "Frame directory, scene .json or container file")->required();
  run->add_option("-o,--out", run_args.out_dir, "Output directory")->required();
  run->add_flag("--overlays", run_args.overlays, "Also write PNG overlays");
  run->add_option("--strategy", run_args.strategy, "Query sampling strategy");
  run->add_option("--points", run_args.points, "Query points per instance")->check(CLI::Range(1, 9));
  run->add_option("--tracker", run_args.tracker, "Tracker adapter name");
  run->add_option("--segmenter", run_args.segmenter, "Segmenter adapter name");
  run->add_option("--decode-command", run_args.decode_command, "Decoder for container files");

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "Score a run against ground truth");
  eval->add_option("-r,--results", eval_args.results, "Run output or frame-record directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  eval->add_option("-d,--dataset", eval_args.dataset, "Dataset root")->required()->check(CLI::ExistingDirectory);
  eval->add_option("-o,--out", eval_args.out_dir, "Report directory (default: the results directory)");
  eval->add_option("--method", eval_args.method, "Method label for the report");
  eval->add_option("--encoding", eval_args.encoding, "Mask encoding")->check(CLI::IsMember({"palette", "binary"}));
  eval->add_option("--frames-dir", eval_args.frames_dir, "Frame subdirectory");
  eval->add_option("--masks-dir", eval_args.masks_dir, "Mask subdirectory");
  eval->add_flag("--allow-unlabeled", eval_args.allow_unlabeled, "Skip result frames without ground truth");
  std::optional<std::uint64_t> eval_seed;
  eval->add_option("--seed", eval_seed, "Accepted for uniformity; evaluation draws no random numbers");

  BenchArgs bench_args;
  CLI::App* bench = app.add_subcommand("bench", "Measure latency, memory and parameters");
  add_common(bench, bench_args.common);
  bench->add_option("-v,--video", bench_args.video, "Video to time")->required();
  bench->add_option("-o,--out", bench_args.out_dir, "Output directory")->required();
  bench->add_option("--device", bench_args.device, "Device label for the report");
  bench->add_option("--method", bench_args.method, "Method label for the report");
  bench->add_option("--warmup", bench_args.warmup, "Warmup frames (including initialisation)");
  bench->add_option("--min-frames", bench_args.min_frames, "Minimum measured frames");
  bench->add_option("--decode-command", bench_args.decode_command, "Decoder for container files");

  FinetuneArgs ft_args;
  CLI::App* ft = app.add_subcommand("finetune", "Fine-tune the trainable segmenter");
  add_common(ft, ft_args.common);
  ft->add_option("-m,--manifest", ft_args.manifest, "JSON-lines dataset manifest")
      ->required()
      ->check(CLI::ExistingFile);
  ft->add_option("-o,--out", ft_args.out_dir, "Checkpoint and metrics directory")->required();
  ft->add_option("--run-id", ft_args.run_id, "Prefix for output files");
  ft->add_option("--resume", ft_args.resume, "Checkpoint to continue from")->check(CLI::ExistingFile);
  ft->add_option("--epochs", ft_args.epochs, "Override train.epochs")->check(CLI::PositiveNumber);

  ServeArgs serve_args;
  CLI::App* serve = app.add_subcommand("serve", "Run the session service");
  add_common(serve, serve_args.common);
  serve->add_option("--host", serve_args.host, "Bind address");
  serve->add_option("--port", serve_args.port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));
  serve->add_option("--results-root", serve_args.results_root, "Per-session result directories");

  SynthArgs synth_args;
  CLI::App* syn = app.add_subcommand("synth", "Write a synthetic video or toy training set");
  add_common(syn, synth_args.common);
  syn->add_option("-o,--out", synth_args.out_dir, "Output directory")->required();
  syn->add_option("--preset", synth_args.preset, "Scene preset")
      ->check(CLI::IsMember({"moving_disk", "occlusion", "two_object", "panning"}));
  syn->add_option("--frames", synth_args.frames, "Override the frame count")->check(CLI::PositiveNumber);
  syn->add_option("--toy", synth_args.toy, "Write this many toy training samples instead of a video");
  syn->add_option("--toy-val", synth_args.toy_val, "Additional toy validation samples");
  syn->add_option("--toy-size", synth_args.toy_size, "Toy image side")->check(CLI::Range(8, 4096));

  AdapterServeArgs as_args;
  CLI::App* as = app.add_subcommand("adapter-serve", "Expose a local adapter over the socket protocol");
  add_common(as, as_args.common);
  as->add_option("--kind", as_args.kind, "tracker or segmenter")
      ->required()
      ->check(CLI::IsMember({"tracker", "segmenter"}));
  as->add_option("--endpoint", as_args.endpoint, "unix:/path or tcp:host:port")->required();
  as->add_option("--connections", as_args.connections, "Exit after this many connections (0: never)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << "tapseg " << version() << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (print_schema) {
      out << config_schema().dump(2) << "\n";
      return kExitOk;
    }
    if (run->parsed()) return cmd_run(run_args, args, out, err);
    if (eval->parsed()) return cmd_eval(eval_args, out);
    if (bench->parsed()) return cmd_bench(bench_args, args, out);
    if (ft->parsed()) return cmd_finetune(ft_args, args, out);
    if (serve->parsed()) return cmd_serve(serve_args, out, err);
    if (syn->parsed()) return cmd_synth(synth_args, out);
    if (as->parsed()) return cmd_adapter_serve(as_args, out);
    out << app.help();
    return kExitUsage;
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace tapseg::cli
