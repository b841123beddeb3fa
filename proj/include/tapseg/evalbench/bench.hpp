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

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tapseg/core/stats.hpp"
#include "tapseg/finetune/train.hpp"
#include "tapseg/pipeline/pipeline.hpp"

namespace tapseg::evalbench {

struct FrameLatency {
  std::int64_t frame_index = 0;
  pipeline::StageTimings timings;
};

struct LatencyBench {
  std::string device;
  int warmup_frames = 0;
  std::vector<FrameLatency> measured;  // warmup excluded
  LatencyStats track;
  LatencyStats segment;
  LatencyStats total;
};

struct BenchOptions {
  int warmup_frames = 20;
  int min_measured_frames = 200;
  std::string device = "cpu";
  // Raw per-frame dump; written whenever set.
  std::optional<std::filesystem::path> raw_csv;
};

using PipelineFactory = std::function<std::unique_ptr<pipeline::Pipeline>()>;

// Times the track + segment path of every frame. The first frame
// (initialisation) counts toward the warmup; all frames after the warmup
// are measured. Decoding is outside the timed region. Throws
// kInsufficientData when fewer than min_measured_frames remain.
LatencyBench bench_latency(const PipelineFactory& factory, pipeline::VideoSource& video,
                           const BenchOptions& options);

// frame_index,track_ms,segment_ms,total_ms
void write_latency_csv(const std::filesystem::path& path, std::span<const FrameLatency> rows);
std::vector<FrameLatency> read_latency_csv(const std::filesystem::path& path);

struct ParameterGroupSize {
  std::string group;
  std::uint64_t count = 0;
};

// Optional interface for adapters that can report their parameter groups.
class ParameterIntrospection {
 public:
  virtual ~ParameterIntrospection() = default;
  virtual std::vector<ParameterGroupSize> parameter_group_sizes() const = 0;
};

// Scalars in non-frozen groups, in millions rounded to one decimal.
double count_learnable_params(std::span<const ParameterGroupSize> groups,
                              const finetune::FreezeMap& freeze);
double count_learnable_params(finetune::TrainingAdapter& model, const finetune::FreezeMap& freeze);
// Throws kCapability unless the adapter implements ParameterIntrospection.
double count_learnable_params(const segmenters::SegmenterAdapter& adapter,
                              const finetune::FreezeMap& freeze);

// Optional interface for backends that know their peak device memory.
class MemoryIntrospection {
 public:
  virtual ~MemoryIntrospection() = default;
  virtual std::optional<double> peak_device_memory_gb() const = 0;
};

struct MemoryReading {
  double gb = 0.0;
  std::string provenance;  // "backend:<name>" or "rss_delta"
};

// Resident set of this process in bytes: current and high-water mark.
struct RssSample {
  std::uint64_t current = 0;
  std::uint64_t peak = 0;
};
RssSample sample_rss();

// Backend figure when the adapter offers one, else the growth of the peak
// resident set since `baseline`.
MemoryReading inference_memory(const segmenters::SegmenterAdapter* adapter, const RssSample& baseline);

struct BenchReport {
  std::string method;
  std::string dataset;
  double mean_iou = 0.0;
  double mean_dice = 0.0;
  std::map<std::string, LatencyStats> latency_ms;  // by device label
  std::optional<MemoryReading> memory;
  std::optional<double> learnable_params_m;
};

nlohmann::json to_json(const BenchReport& r);

// Aligned-column tables: accuracy (method x dataset IoU/Dice) and
// efficiency (latency per device, memory, parameters).
std::string format_accuracy_table(std::span<const BenchReport> reports);
std::string format_efficiency_table(std::span<const BenchReport> reports);

}  // namespace tapseg::evalbench
