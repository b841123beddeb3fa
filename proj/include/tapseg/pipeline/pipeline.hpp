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

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>

#include "json.hpp"
#include "tapseg/core/stats.hpp"
#include "tapseg/pipeline/config.hpp"
#include "tapseg/pipeline/video_source.hpp"
#include "tapseg/segmenters/segmenter.hpp"
#include "tapseg/trackers/tracker.hpp"

namespace tapseg::pipeline {

struct StageTimings {
  double track_ms = 0.0;
  double segment_ms = 0.0;
  double total_ms = 0.0;
};

// Something noteworthy that happened while producing a frame.
struct PipelineEvent {
  std::string kind;  // "init", "reinit", "tracker_restart", "instance_added"
  InstanceId instance_id = 0;
  int points = 0;
};

struct FrameResult {
  std::int64_t frame_index = 0;
  InstanceMaskSet masks;
  std::vector<TrackedPointSet> tracked;
  std::vector<segmenters::PromptBundle> prompts_used;
  StageTimings timings;
  std::vector<PipelineEvent> events;
};

// {"frame_index", "masks": {"<id>": {"counts", "height", "width"}},
//  "tracked": [...], "prompts": [...], "events": [...], "timings": {...}}.
// Timings are left out when `with_timings` is false so that reruns compare
// byte for byte.
nlohmann::json to_json(const FrameResult& result, bool with_timings = true);

// Eqs. init -> sample -> track -> filter -> segment over a frame stream.
// One logical thread of control; not safe for concurrent calls.
class Pipeline {
 public:
  // Errors: kConfiguration for an invalid config; kCapability when the
  // segmenter cannot serve the init mode or point prompts.
  Pipeline(PipelineConfig config, std::shared_ptr<const trackers::TrackerAdapter> tracker,
           std::shared_ptr<const segmenters::SegmenterAdapter> segmenter);

  // First frame. Errors: kEmptyRegion when an initial mask is empty.
  FrameResult initialize(const Frame& first);

  // Errors: kOrdering for non-increasing indices; backend errors are
  // rethrown with the frame index in the message.
  FrameResult process_frame(const Frame& frame);

  // Segments `prompt` on the latest frame, samples queries on the result and
  // starts tracking it. instance_id 0 picks the next free id. Errors:
  // kEmptyRegion (state unchanged), kState before initialize().
  InstanceId add_instance(segmenters::PromptBundle prompt);

  bool initialized() const { return session_ != nullptr; }
  std::int64_t current_frame_index() const;
  const PipelineConfig& config() const { return config_; }
  std::vector<InstanceId> instance_ids() const;

 private:
  struct InstanceState {
    int low_visibility_streak = 0;
    std::optional<BinaryMask> last_mask;  // last non-empty predicted mask
  };

  sampling::SamplingStrategy strategy_at(std::int64_t frame_index, InstanceId id) const;
  void reinitialize(InstanceId id, const Frame& frame, FrameResult& result);
  void start_tracking(const Frame& frame, std::vector<QueryPointSet> queries);

  PipelineConfig config_;
  std::shared_ptr<const trackers::TrackerAdapter> tracker_;
  std::shared_ptr<const segmenters::SegmenterAdapter> segmenter_;
  std::unique_ptr<trackers::TrackerSession> session_;
  std::optional<Frame> current_;
  std::map<InstanceId, InstanceState> instances_;
  std::vector<PipelineEvent> pending_events_;
};

struct RunSummary {
  std::int64_t frames = 0;
  std::int64_t dropped = 0;
  LatencyStats track;
  LatencyStats segment;
  LatencyStats total;
  std::optional<std::string> error;  // set when the run aborted
  std::optional<std::int64_t> failed_frame;
};

nlohmann::json to_json(const RunSummary& summary);

using FrameSink = std::function<void(const FrameResult&, const Frame&)>;

// Streams every frame of `source` through `pipeline` into `sink` in frame
// order (the sink runs synchronously, so a slow sink slows the producer
// instead of losing frames). The first error stops the run; the summary
// covers the frames finished before it.
RunSummary run(VideoSource& source, Pipeline& pipeline, const FrameSink& sink);

// Writes frame_NNNNNN.json (and overlays/frame_NNNNNN.png when enabled)
// into `dir`.
class ResultWriter {
 public:
  ResultWriter(std::filesystem::path dir, bool overlays);
  void operator()(const FrameResult& result, const Frame& frame) const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  bool overlays_;
};

// Reads back the records written by ResultWriter, ordered by frame index.
std::vector<FrameResult> read_results(const std::filesystem::path& dir);
FrameResult frame_result_from_json(const nlohmann::json& j);

}  // namespace tapseg::pipeline
