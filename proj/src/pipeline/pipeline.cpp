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

#include "tapseg/pipeline/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>

#include "tapseg/core/error.hpp"
#include "tapseg/core/rle.hpp"
#include "tapseg/io/frame_codec.hpp"
#include "tapseg/io/image_io.hpp"

namespace tapseg::pipeline {

namespace fs = std::filesystem;
using segmenters::PromptBundle;
using segmenters::PromptMode;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

[[noreturn]] void rethrow_at(const Error& e, std::int64_t frame_index) {
  throw Error(e.code(), "frame " + std::to_string(frame_index) + ": " + e.what());
}

void require_mode(const segmenters::SegmenterAdapter& seg, PromptMode mode, const std::string& why) {
  if (!seg.prompt_modes().contains(mode)) {
    fail(ErrorCode::kCapability, "segmenter '" + seg.name() + "' lacks " +
                                     segmenters::to_string(mode) + " prompts needed for " + why);
  }
}

Point clamp_into(const Point& p, const Frame& f) {
  const double eps = 1e-6;
  return {std::clamp(p.x, 0.0, f.width() - eps), std::clamp(p.y, 0.0, f.height() - eps)};
}

}  // namespace

Pipeline::Pipeline(PipelineConfig config, std::shared_ptr<const trackers::TrackerAdapter> tracker,
                   std::shared_ptr<const segmenters::SegmenterAdapter> segmenter)
    : config_(std::move(config)), tracker_(std::move(tracker)), segmenter_(std::move(segmenter)) {
  config_.validate();
  require(tracker_ && segmenter_, ErrorCode::kConfiguration, "pipeline needs both adapters");
  require_mode(*segmenter_, PromptMode::kPoints, "per-frame segmentation");
  if (config_.init.mode == InitMode::kText) require_mode(*segmenter_, PromptMode::kText, "text init");
  if (config_.init.mode == InitMode::kBox) require_mode(*segmenter_, PromptMode::kBox, "box init");
}

std::int64_t Pipeline::current_frame_index() const {
  require(current_.has_value(), ErrorCode::kState, "pipeline not initialised");
  return current_->index();
}

std::vector<InstanceId> Pipeline::instance_ids() const {
  std::vector<InstanceId> ids;
  for (const auto& [id, _] : instances_) ids.push_back(id);
  return ids;
}

sampling::SamplingStrategy Pipeline::strategy_at(std::int64_t frame_index, InstanceId) const {
  sampling::SamplingStrategy s = config_.strategy;
  s.seed = sampling::derive_seed(config_.strategy.seed, static_cast<std::uint64_t>(frame_index));
  return s;
}

void Pipeline::start_tracking(const Frame& frame, std::vector<QueryPointSet> queries) {
  session_ = std::make_unique<trackers::TrackerSession>(tracker_, frame, std::move(queries),
                                                        config_.window_size);
}

FrameResult Pipeline::initialize(const Frame& first) {
  require(!initialized(), ErrorCode::kState, "pipeline already initialised");
  const auto start = Clock::now();
  InstanceMaskSet masks(first.index(), first.size());
  std::vector<QueryPointSet> queries;
  const InitSpec& init = config_.init;

  try {
    switch (init.mode) {
      case InitMode::kText:
        masks = segmenters::init_mask_from_text(*segmenter_, first, init.text);
        break;
      case InitMode::kBox:
        require(!init.boxes.empty(), ErrorCode::kInvalidArgument, "box init without boxes");
        masks = segmenters::init_mask_from_box(*segmenter_, first, init.boxes);
        break;
      case InitMode::kMaskFile: {
        masks = io::read_palette_mask_png(init.mask_file, first.index());
        require(masks.size().height == first.height() && masks.size().width == first.width(),
                ErrorCode::kInvalidArgument, "init mask " + init.mask_file + " does not match the frame size");
        break;
      }
      case InitMode::kPoints: {
        require(!init.points.empty(), ErrorCode::kInvalidArgument, "points init without clicks");
        std::vector<PromptBundle> bundles;
        for (const auto& [id, pts] : init.points) {
          require(id > 0, ErrorCode::kInvalidArgument, "instance ids must be positive");
          bundles.push_back({id, pts, std::nullopt, std::nullopt});
          queries.push_back({id, pts, first.index()});
        }
        masks = segmenters::segment(*segmenter_, first, bundles);
        break;
      }
    }
  } catch (const Error& e) {
    rethrow_at(e, first.index());
  }

  require(!masks.masks().empty(), ErrorCode::kEmptyRegion,
          "initialisation produced no instances on frame " + std::to_string(first.index()));
  for (const auto& [id, m] : masks.masks()) {
    if (m.none()) {
      fail(ErrorCode::kEmptyRegion, "initial mask of instance " + std::to_string(id) +
                                        " is empty on frame " + std::to_string(first.index()));
    }
  }
  if (queries.empty()) queries = sampling::sample_query_points(first, masks, config_.strategy);

  try {
    start_tracking(first, queries);
  } catch (const Error& e) {
    rethrow_at(e, first.index());
  }
  instances_.clear();
  for (const auto& [id, m] : masks.masks()) instances_[id].last_mask = m;
  current_ = first;

  FrameResult result;
  result.frame_index = first.index();
  result.masks = std::move(masks);
  result.tracked = session_->latest();
  for (const auto& q : queries) {
    result.prompts_used.push_back({q.instance_id, q.points, std::nullopt, std::nullopt});
    result.events.push_back({"init", q.instance_id, static_cast<int>(q.points.size())});
  }
  result.timings.total_ms = ms_since(start);
  result.timings.segment_ms = result.timings.total_ms;
  return result;
}

void Pipeline::reinitialize(InstanceId id, const Frame& frame, FrameResult& result) {
  InstanceState& st = instances_.at(id);
  if (!st.last_mask) return;
  const auto pts = sampling::sample_instance(frame, *st.last_mask, id, strategy_at(frame.index(), id));
  if (tracker_->capabilities().supports_midstream_queries) {
    session_->remove_instance(id);
    session_->add_queries({{id, pts, frame.index()}}, frame);
    result.events.push_back({"reinit", id, static_cast<int>(pts.size())});
  } else {
    // Restart: the reinitialised instance gets fresh points, the others keep
    // their latest estimates.
    std::vector<QueryPointSet> queries;
    for (const auto& set : session_->latest()) {
      if (set.instance_id == id) {
        queries.push_back({id, pts, frame.index()});
        continue;
      }
      QueryPointSet q{set.instance_id, {}, frame.index()};
      for (const auto& p : set.points) q.points.push_back(clamp_into(p, frame));
      queries.push_back(std::move(q));
    }
    start_tracking(frame, std::move(queries));
    result.events.push_back({"tracker_restart", id, static_cast<int>(pts.size())});
  }
  st.low_visibility_streak = 0;
}

FrameResult Pipeline::process_frame(const Frame& frame) {
  require(initialized(), ErrorCode::kState, "process_frame before initialize");
  if (frame.index() <= current_->index()) {
    fail(ErrorCode::kOrdering, "frame " + std::to_string(frame.index()) +
                                   " does not follow frame " + std::to_string(current_->index()));
  }
  const auto start = Clock::now();
  FrameResult result;
  result.frame_index = frame.index();
  result.events = std::move(pending_events_);
  pending_events_.clear();

  try {
    const auto t_track = Clock::now();
    result.tracked = session_->step(frame);
    result.timings.track_ms = ms_since(t_track);

    // Only visible points become prompts; instances with none skip the
    // segmenter and get an empty mask.
    for (const auto& set : result.tracked) {
      PromptBundle b{set.instance_id, {}, std::nullopt, std::nullopt};
      for (std::size_t i = 0; i < set.points.size(); ++i) {
        if (set.visible[i] && frame.contains(set.points[i])) b.positive_points.push_back(set.points[i]);
      }
      if (!b.positive_points.empty()) result.prompts_used.push_back(std::move(b));
    }
    const auto t_seg = Clock::now();
    InstanceMaskSet segmented = segmenters::segment(*segmenter_, frame, result.prompts_used);
    result.timings.segment_ms = ms_since(t_seg);

    result.masks = InstanceMaskSet(frame.index(), frame.size());
    for (const auto& set : result.tracked) {
      const auto& masks = segmented.masks();
      const auto it = masks.find(set.instance_id);
      result.masks.insert(set.instance_id,
                          it != masks.end() ? it->second : BinaryMask(frame.height(), frame.width()));
    }

    for (const auto& set : result.tracked) {
      InstanceState& st = instances_[set.instance_id];
      const BinaryMask& m = result.masks.at(set.instance_id);
      if (!m.none()) st.last_mask = m;
      if (static_cast<int>(set.visible_count()) < config_.min_visible_points) {
        ++st.low_visibility_streak;
      } else {
        st.low_visibility_streak = 0;
      }
    }
    for (auto& [id, st] : instances_) {
      if (st.low_visibility_streak >= config_.reinit_patience_frames) reinitialize(id, frame, result);
    }
  } catch (const Error& e) {
    rethrow_at(e, frame.index());
  }
  current_ = frame;
  result.timings.total_ms = ms_since(start);
  return result;
}

InstanceId Pipeline::add_instance(PromptBundle prompt) {
  require(initialized(), ErrorCode::kState, "add_instance before initialize");
  const Frame& frame = *current_;
  if (prompt.instance_id == 0) {
    prompt.instance_id = instances_.empty() ? 1 : instances_.rbegin()->first + 1;
  }
  require(!instances_.contains(prompt.instance_id), ErrorCode::kInvalidArgument,
          "instance " + std::to_string(prompt.instance_id) + " already exists");
  const InstanceId id = prompt.instance_id;
  const InstanceMaskSet seg = segmenters::segment(*segmenter_, frame, std::span(&prompt, 1));
  const BinaryMask& mask = seg.at(id);
  if (mask.none()) {
    fail(ErrorCode::kEmptyRegion, "prompt for new instance " + std::to_string(id) +
                                      " segments nothing on frame " + std::to_string(frame.index()));
  }
  const auto pts = sampling::sample_instance(frame, mask, id, strategy_at(frame.index(), id));
  if (tracker_->capabilities().supports_midstream_queries) {
    session_->add_queries({{id, pts, frame.index()}}, frame);
  } else {
    std::vector<QueryPointSet> queries;
    for (const auto& set : session_->latest()) {
      QueryPointSet q{set.instance_id, {}, frame.index()};
      for (const auto& p : set.points) q.points.push_back(clamp_into(p, frame));
      queries.push_back(std::move(q));
    }
    queries.push_back({id, pts, frame.index()});
    start_tracking(frame, std::move(queries));
  }
  instances_[id].last_mask = mask;
  pending_events_.push_back({"instance_added", id, static_cast<int>(pts.size())});
  return id;
}

// ---------------------------------------------------------------------------

RunSummary run(VideoSource& source, Pipeline& pipeline, const FrameSink& sink) {
  RunSummary summary;
  std::vector<double> track, segment, total;
  std::optional<Frame> frame = source.next();
  require(frame.has_value(), ErrorCode::kInvalidArgument, "video yields no frames");
  try {
    while (frame) {
      summary.failed_frame = frame->index();
      if (!pipeline.initialized()) {
        sink(pipeline.initialize(*frame), *frame);
      } else {
        const FrameResult r = pipeline.process_frame(*frame);
        track.push_back(r.timings.track_ms);
        segment.push_back(r.timings.segment_ms);
        total.push_back(r.timings.total_ms);
        sink(r, *frame);
      }
      ++summary.frames;
      frame = source.next();
    }
    summary.failed_frame.reset();
  } catch (const std::exception& e) {
    summary.error = e.what();
  }
  summary.dropped = source.dropped();
  summary.track = summarize(std::move(track));
  summary.segment = summarize(std::move(segment));
  summary.total = summarize(std::move(total));
  return summary;
}

nlohmann::json to_json(const RunSummary& s) {
  nlohmann::json j = {{"frames", s.frames},
                      {"dropped_count", s.dropped},
                      {"latency_ms",
                       {{"track", to_json(s.track)},
                        {"segment", to_json(s.segment)},
                        {"total", to_json(s.total)}}},
                      {"error", nullptr}};
  if (s.error) j["error"] = *s.error;
  if (s.failed_frame) j["failed_frame"] = *s.failed_frame;
  return j;
}

nlohmann::json to_json(const FrameResult& r, bool with_timings) {
  nlohmann::json masks = nlohmann::json::object();
  for (const auto& [id, m] : r.masks.masks()) masks[std::to_string(id)] = rle_to_json(m);
  nlohmann::json tracked = nlohmann::json::array();
  for (const auto& t : r.tracked) {
    tracked.push_back({{"instance_id", t.instance_id},
                       {"points", io::points_to_json(t.points)},
                       {"visible", t.visible}});
  }
  nlohmann::json prompts = nlohmann::json::array();
  for (const auto& p : r.prompts_used) {
    prompts.push_back({{"instance_id", p.instance_id}, {"points", io::points_to_json(p.positive_points)}});
  }
  nlohmann::json events = nlohmann::json::array();
  for (const auto& e : r.events) {
    events.push_back({{"kind", e.kind}, {"instance_id", e.instance_id}, {"points", e.points}});
  }
  nlohmann::json j = {{"frame_index", r.frame_index},
                      {"height", r.masks.size().height},
                      {"width", r.masks.size().width},
                      {"masks", masks},
                      {"tracked", tracked},
                      {"prompts", prompts},
                      {"events", events}};
  if (with_timings) {
    j["timings"] = {{"track_ms", r.timings.track_ms},
                    {"segment_ms", r.timings.segment_ms},
                    {"total_ms", r.timings.total_ms}};
  }
  return j;
}

FrameResult frame_result_from_json(const nlohmann::json& j) {
  try {
    FrameResult r;
    r.frame_index = j.at("frame_index").get<std::int64_t>();
    r.masks = InstanceMaskSet(r.frame_index, {j.at("height").get<int>(), j.at("width").get<int>()});
    for (const auto& [key, m] : j.at("masks").items()) r.masks.insert(std::stoll(key), rle_from_json(m));
    for (const auto& t : j.value("tracked", nlohmann::json::array())) {
      r.tracked.push_back({t.at("instance_id").get<InstanceId>(), r.frame_index,
                           io::points_from_json(t.at("points")),
                           t.at("visible").get<std::vector<bool>>()});
    }
    for (const auto& p : j.value("prompts", nlohmann::json::array())) {
      r.prompts_used.push_back({p.at("instance_id").get<InstanceId>(),
                                io::points_from_json(p.at("points")), std::nullopt, std::nullopt});
    }
    for (const auto& e : j.value("events", nlohmann::json::array())) {
      r.events.push_back({e.at("kind").get<std::string>(), e.value("instance_id", InstanceId{0}),
                          e.value("points", 0)});
    }
    if (j.contains("timings")) {
      const auto& t = j["timings"];
      r.timings = {t.value("track_ms", 0.0), t.value("segment_ms", 0.0), t.value("total_ms", 0.0)};
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kDecode, std::string("frame record: ") + e.what());
  }
}

ResultWriter::ResultWriter(fs::path dir, bool overlays) : dir_(std::move(dir)), overlays_(overlays) {
  fs::create_directories(dir_);
  if (overlays_) fs::create_directories(dir_ / "overlays");
}

namespace {

std::string frame_name(std::int64_t index, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "frame_%06lld.%s", static_cast<long long>(index), ext);
  return buf;
}

}  // namespace

void ResultWriter::operator()(const FrameResult& result, const Frame& frame) const {
  const fs::path path = dir_ / frame_name(result.frame_index, "json");
  std::ofstream out(path);
  require(out.good(), ErrorCode::kIo, "cannot write " + path.string());
  out << to_json(result).dump() << '\n';
  if (overlays_) {
    io::write_frame_png(dir_ / "overlays" / frame_name(result.frame_index, "png"),
                        io::overlay(frame, result.masks, result.tracked));
  }
}

std::vector<FrameResult> read_results(const fs::path& dir) {
  require(fs::is_directory(dir), ErrorCode::kIo, "no such results directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.starts_with("frame_") && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::vector<FrameResult> out;
  for (const auto& f : files) {
    std::ifstream in(f);
    try {
      out.push_back(frame_result_from_json(nlohmann::json::parse(in)));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kDecode, f.string() + ": " + e.what());
    }
  }
  std::sort(out.begin(), out.end(),
            [](const FrameResult& a, const FrameResult& b) { return a.frame_index < b.frame_index; });
  return out;
}

}  // namespace tapseg::pipeline
