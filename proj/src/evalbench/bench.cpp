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

#include "tapseg/evalbench/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tapseg/core/error.hpp"

namespace tapseg::evalbench {

namespace fs = std::filesystem;
using nlohmann::json;

LatencyBench bench_latency(const PipelineFactory& factory, pipeline::VideoSource& video,
                           const BenchOptions& options) {
  require(options.warmup_frames >= 1, ErrorCode::kInvalidArgument,
          "bench: warmup must cover at least the initialisation frame");
  require(options.min_measured_frames >= 1, ErrorCode::kInvalidArgument,
          "bench: need at least one measured frame");
  std::unique_ptr<pipeline::Pipeline> pipe = factory();
  require(pipe != nullptr, ErrorCode::kInvalidArgument, "bench: factory returned no pipeline");

  LatencyBench out;
  out.device = options.device;
  out.warmup_frames = options.warmup_frames;
  int seen = 0;
  while (std::optional<Frame> frame = video.next()) {
    const pipeline::FrameResult r = seen == 0 ? pipe->initialize(*frame) : pipe->process_frame(*frame);
    if (seen >= options.warmup_frames) out.measured.push_back({frame->index(), r.timings});
    ++seen;
  }
  if (options.raw_csv) write_latency_csv(*options.raw_csv, out.measured);
  require(out.measured.size() >= static_cast<std::size_t>(options.min_measured_frames),
          ErrorCode::kInsufficientData,
          "bench: " + video.describe() + " gave " + std::to_string(seen) + " frames; need " +
              std::to_string(options.warmup_frames) + " warmup + " +
              std::to_string(options.min_measured_frames) + " measured");
  std::vector<double> track, segment, total;
  for (const auto& m : out.measured) {
    track.push_back(m.timings.track_ms);
    segment.push_back(m.timings.segment_ms);
    total.push_back(m.timings.total_ms);
  }
  out.track = summarize(track);
  out.segment = summarize(segment);
  out.total = summarize(total);
  return out;
}

void write_latency_csv(const fs::path& path, std::span<const FrameLatency> rows) {
  std::ofstream out(path, std::ios::trunc);
  require(out.good(), ErrorCode::kIo, "cannot write " + path.string());
  out << "frame_index,track_ms,segment_ms,total_ms\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g,%.17g\n", static_cast<long long>(r.frame_index),
                  r.timings.track_ms, r.timings.segment_ms, r.timings.total_ms);
    out << buf;
  }
}

std::vector<FrameLatency> read_latency_csv(const fs::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  require(line == "frame_index,track_ms,segment_ms,total_ms", ErrorCode::kDecode,
          path.string() + ": unexpected header");
  std::vector<FrameLatency> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    FrameLatency r;
    long long idx = 0;
    const int n = std::sscanf(line.c_str(), "%lld,%lf,%lf,%lf", &idx, &r.timings.track_ms,
                              &r.timings.segment_ms, &r.timings.total_ms);
    require(n == 4, ErrorCode::kDecode, path.string() + ": bad row '" + line + "'");
    r.frame_index = idx;
    rows.push_back(r);
  }
  return rows;
}

double count_learnable_params(std::span<const ParameterGroupSize> groups,
                              const finetune::FreezeMap& freeze) {
  std::uint64_t total = 0;
  for (const auto& g : groups)
    if (!freeze.frozen(g.group)) total += g.count;
  return std::round(static_cast<double>(total) / 1e5) / 10.0;
}

double count_learnable_params(finetune::TrainingAdapter& model, const finetune::FreezeMap& freeze) {
  std::vector<ParameterGroupSize> groups;
  for (const auto& p : model.parameters()) groups.push_back({p.group, p.values.size()});
  return count_learnable_params(groups, freeze);
}

double count_learnable_params(const segmenters::SegmenterAdapter& adapter,
                              const finetune::FreezeMap& freeze) {
  const auto* intro = dynamic_cast<const ParameterIntrospection*>(&adapter);
  require(intro != nullptr, ErrorCode::kCapability,
          "segmenter '" + adapter.name() + "' does not report its parameters");
  return count_learnable_params(intro->parameter_group_sizes(), freeze);
}

RssSample sample_rss() {
  RssSample s;
  std::ifstream in("/proc/self/status");
  std::string key;
  while (in >> key) {
    std::uint64_t kb = 0;
    if (key == "VmRSS:" && in >> kb) s.current = kb * 1024;
    else if (key == "VmHWM:" && in >> kb) s.peak = kb * 1024;
    in.ignore(1 << 12, '\n');
  }
  return s;
}

MemoryReading inference_memory(const segmenters::SegmenterAdapter* adapter, const RssSample& baseline) {
  if (adapter) {
    if (const auto* intro = dynamic_cast<const MemoryIntrospection*>(adapter)) {
      if (auto gb = intro->peak_device_memory_gb()) return {*gb, "backend:" + adapter->name()};
    }
  }
  const RssSample now = sample_rss();
  const std::uint64_t grown = now.peak > baseline.current ? now.peak - baseline.current : 0;
  return {static_cast<double>(grown) / (1024.0 * 1024.0 * 1024.0), "rss_delta"};
}

json to_json(const BenchReport& r) {
  json latency = json::object();
  for (const auto& [device, stats] : r.latency_ms) latency[device] = to_json(stats);
  return {{"method", r.method},
          {"dataset", r.dataset},
          {"mean_iou", r.mean_iou},
          {"mean_dice", r.mean_dice},
          {"latency_ms", latency},
          {"peak_inference_memory_gb", r.memory ? json(r.memory->gb) : json(nullptr)},
          {"memory_provenance", r.memory ? json(r.memory->provenance) : json(nullptr)},
          {"learnable_params_m", r.learnable_params_m ? json(*r.learnable_params_m) : json(nullptr)}};
}

namespace {

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string render(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& row : rows)
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (width.size() <= c) width.push_back(0);
      width[c] = std::max(width[c], row[c].size());
    }
  std::ostringstream out;
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      const std::string pad(width[c] - row[c].size(), ' ');
      if (c == 0) out << row[c] << pad;
      else out << "  " << pad << row[c];
    }
    out << '\n';
  }
  return out.str();
}

template <typename T, typename Key>
std::vector<T> ordered_unique(std::span<const BenchReport> reports, Key key) {
  std::vector<T> out;
  for (const auto& r : reports)
    for (const T& k : key(r))
      if (std::find(out.begin(), out.end(), k) == out.end()) out.push_back(k);
  return out;
}

}  // namespace

std::string format_accuracy_table(std::span<const BenchReport> reports) {
  const auto methods = ordered_unique<std::string>(reports, [](const BenchReport& r) {
    return std::vector<std::string>{r.method};
  });
  const auto datasets = ordered_unique<std::string>(reports, [](const BenchReport& r) {
    return std::vector<std::string>{r.dataset};
  });
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> head = {"Method"};
  for (const auto& d : datasets) {
    head.push_back(d + " IoU");
    head.push_back(d + " Dice");
  }
  rows.push_back(head);
  for (const auto& m : methods) {
    std::vector<std::string> row = {m};
    for (const auto& d : datasets) {
      const BenchReport* hit = nullptr;
      for (const auto& r : reports)
        if (r.method == m && r.dataset == d) hit = &r;
      row.push_back(hit ? fixed(100.0 * hit->mean_iou, 1) : "-");
      row.push_back(hit ? fixed(100.0 * hit->mean_dice, 1) : "-");
    }
    rows.push_back(row);
  }
  return render(rows);
}

std::string format_efficiency_table(std::span<const BenchReport> reports) {
  const auto devices = ordered_unique<std::string>(reports, [](const BenchReport& r) {
    std::vector<std::string> keys;
    for (const auto& [d, s] : r.latency_ms) keys.push_back(d);
    return keys;
  });
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> head = {"Method"};
  for (const auto& d : devices) head.push_back("Latency " + d + " (ms)");
  head.push_back("Memory (G)");
  head.push_back("Param. (M)");
  rows.push_back(head);
  for (const auto& r : reports) {
    std::vector<std::string> row = {r.method};
    for (const auto& d : devices) {
      auto it = r.latency_ms.find(d);
      row.push_back(it == r.latency_ms.end() ? "-" : fixed(it->second.p50, 1));
    }
    row.push_back(r.memory ? fixed(r.memory->gb, 2) + " [" + r.memory->provenance + "]" : "-");
    row.push_back(r.learnable_params_m ? fixed(*r.learnable_params_m, 1) : "-");
    rows.push_back(row);
  }
  return render(rows);
}

}  // namespace tapseg::evalbench
