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

#include "tapseg/pipeline/adapters.hpp"

#include <cmath>
#include <thread>

#include "tapseg/core/error.hpp"
#include "tapseg/segmenters/socket_segmenter.hpp"
#include "tapseg/trackers/socket_tracker.hpp"

namespace tapseg::pipeline {

namespace {

std::chrono::microseconds sleep_option(const nlohmann::json& o) {
  const double ms = o.value("sleep_ms", 5.0);
  require(ms >= 0.0, ErrorCode::kConfiguration, "stub: sleep_ms must be non-negative");
  return std::chrono::microseconds(static_cast<std::int64_t>(std::llround(ms * 1000.0)));
}

// Sleeps until the deadline; plain sleep_for may undershoot on some kernels.
void spend(std::chrono::microseconds cost) {
  const auto until = std::chrono::steady_clock::now() + cost;
  while (std::chrono::steady_clock::now() < until) std::this_thread::sleep_until(until);
}

class StubBackend : public trackers::TrackerBackend {
 public:
  explicit StubBackend(std::chrono::microseconds cost) : cost_(cost) {}
  std::vector<TrackedPointSet> init(const Frame& f, std::span<const QueryPointSet> q) override {
    queries_.assign(q.begin(), q.end());
    return at(f.index());
  }
  std::vector<TrackedPointSet> step(std::span<const Frame> window) override {
    spend(cost_);
    return at(window.back().index());
  }
  std::vector<TrackedPointSet> add(std::span<const QueryPointSet> q, const Frame& f) override {
    queries_.insert(queries_.end(), q.begin(), q.end());
    return at(f.index());
  }
  void remove(InstanceId id) override {
    std::erase_if(queries_, [id](const QueryPointSet& q) { return q.instance_id == id; });
  }

 private:
  std::vector<TrackedPointSet> at(std::int64_t t) const {
    std::vector<TrackedPointSet> out;
    for (const auto& q : queries_) {
      out.push_back({q.instance_id, t, q.points, std::vector<bool>(q.points.size(), true)});
    }
    return out;
  }
  std::chrono::microseconds cost_;
  std::vector<QueryPointSet> queries_;
};

}  // namespace

std::unique_ptr<trackers::TrackerBackend> StubTracker::open() const {
  return std::make_unique<StubBackend>(cost_);
}

std::vector<GrayImage> StubSegmenter::predict(
    const Frame& input, std::span<const segmenters::PromptBundle> prompts) const {
  spend(cost_);
  std::vector<GrayImage> out;
  for (const auto& b : prompts) {
    GrayImage g{input.height(), input.width(),
                std::vector<float>(static_cast<std::size_t>(input.height()) * input.width(), 0.0f)};
    for (const auto& p : b.positive_points) {
      if (!input.contains(p)) continue;
      g.data[static_cast<std::size_t>(std::floor(p.y)) * g.width +
             static_cast<std::size_t>(std::floor(p.x))] = 1.0f;
    }
    if (b.positive_points.empty() && b.box) {
      for (int r = 0; r < g.height; ++r)
        for (int c = 0; c < g.width; ++c) {
          const Point q = cell_center(r, c);
          if (q.x >= b.box->x_min && q.x <= b.box->x_max && q.y >= b.box->y_min &&
              q.y <= b.box->y_max) {
            g.data[static_cast<std::size_t>(r) * g.width + c] = 1.0f;
          }
        }
    }
    out.push_back(std::move(g));
  }
  return out;
}

std::shared_ptr<const trackers::TrackerAdapter> make_tracker(const AdapterSpec& spec,
                                                             const AdapterContext& ctx) {
  const auto& o = spec.options;
  try {
    if (spec.name == "oracle") {
      require(ctx.motion != nullptr, ErrorCode::kConfiguration,
              "tracker 'oracle' needs a synthetic source with a known motion field");
      return std::make_shared<trackers::OracleTracker>(ctx.motion);
    }
    if (spec.name == "ncc_block") {
      trackers::NccTrackerOptions opt;
      opt.patch_radius = o.value("patch_radius", opt.patch_radius);
      opt.search_radius = o.value("search_radius", opt.search_radius);
      opt.min_correlation = o.value("min_correlation", opt.min_correlation);
      require(opt.patch_radius >= 1 && opt.search_radius >= 0, ErrorCode::kConfiguration,
              "tracker.options: radii must be positive");
      return std::make_shared<trackers::NccBlockTracker>(opt);
    }
    if (spec.name == "socket") {
      require(o.contains("endpoint"), ErrorCode::kConfiguration,
              "tracker.options.endpoint is required for 'socket'");
      return std::make_shared<trackers::SocketTracker>(
          o["endpoint"].get<std::string>(), o.value("label", std::string("socket")),
          trackers::TrackerCapabilities{o.value("supports_visibility", true),
                                        o.value("supports_midstream_queries", true)});
    }
    if (spec.name == "stub") return std::make_shared<StubTracker>(sleep_option(o));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfiguration, "tracker.options: " + std::string(e.what()));
  }
  fail(ErrorCode::kConfiguration, "tracker.name: unknown adapter '" + spec.name + "'");
}

std::shared_ptr<const segmenters::SegmenterAdapter> make_segmenter(const AdapterSpec& spec) {
  using segmenters::PromptMode;
  const auto& o = spec.options;
  try {
    if (spec.name == "threshold_flood") {
      std::optional<Size> native;
      if (o.contains("native_hw") && !o["native_hw"].is_null()) {
        const auto hw = o["native_hw"].get<std::vector<int>>();
        require(hw.size() == 2 && hw[0] > 0 && hw[1] > 0, ErrorCode::kConfiguration,
                "segmenter.options.native_hw must be [h, w]");
        native = Size{hw[0], hw[1]};
      }
      return std::make_shared<segmenters::ThresholdFloodSegmenter>(
          o.value("intensity_threshold", 128.0), native);
    }
    if (spec.name == "socket") {
      require(o.contains("endpoint"), ErrorCode::kConfiguration,
              "segmenter.options.endpoint is required for 'socket'");
      std::set<PromptMode> modes = {PromptMode::kPoints, PromptMode::kBox, PromptMode::kText};
      if (o.contains("modes")) {
        modes.clear();
        for (const auto& m : o["modes"]) {
          const auto s = m.get<std::string>();
          if (s == "points") modes.insert(PromptMode::kPoints);
          else if (s == "box") modes.insert(PromptMode::kBox);
          else if (s == "text") modes.insert(PromptMode::kText);
          else fail(ErrorCode::kConfiguration, "segmenter.options.modes: unknown mode '" + s + "'");
        }
      }
      return std::make_shared<segmenters::SocketSegmenter>(
          o["endpoint"].get<std::string>(), o.value("label", std::string("socket")), modes);
    }
    if (spec.name == "stub") return std::make_shared<StubSegmenter>(sleep_option(o));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfiguration, "segmenter.options: " + std::string(e.what()));
  }
  fail(ErrorCode::kConfiguration, "segmenter.name: unknown adapter '" + spec.name + "'");
}

}  // namespace tapseg::pipeline
