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

#include <chrono>
#include <memory>

#include "tapseg/pipeline/config.hpp"
#include "tapseg/segmenters/segmenter.hpp"
#include "tapseg/trackers/tracker.hpp"

namespace tapseg::pipeline {

// Resources some adapters need beyond their options.
struct AdapterContext {
  // Analytic motion for the oracle tracker (synthetic sources only).
  std::shared_ptr<const trackers::MotionField> motion;
};

// Known names:
//   tracker:   oracle, ncc_block {patch_radius, search_radius, min_correlation},
//              socket {endpoint, label, supports_visibility, supports_midstream_queries},
//              stub {sleep_ms}
//   segmenter: threshold_flood {intensity_threshold, native_hw: [h, w]},
//              socket {endpoint, label, modes: [...]}, stub {sleep_ms}
// Errors: kConfiguration for unknown names, bad options, or an oracle
// tracker without a motion field.
std::shared_ptr<const trackers::TrackerAdapter> make_tracker(const AdapterSpec& spec,
                                                             const AdapterContext& ctx = {});
std::shared_ptr<const segmenters::SegmenterAdapter> make_segmenter(const AdapterSpec& spec);

// Fixed-cost tracker: sleeps, then reports every point where it was queried.
class StubTracker : public trackers::TrackerAdapter {
 public:
  explicit StubTracker(std::chrono::microseconds cost) : cost_(cost) {}
  std::string name() const override { return "stub"; }
  trackers::TrackerCapabilities capabilities() const override { return {true, true}; }
  std::unique_ptr<trackers::TrackerBackend> open() const override;

 private:
  std::chrono::microseconds cost_;
};

// Fixed-cost segmenter: sleeps, then marks the pixels under the prompt
// points (box and text prompts mark the box area or nothing).
class StubSegmenter : public segmenters::SegmenterAdapter {
 public:
  explicit StubSegmenter(std::chrono::microseconds cost) : cost_(cost) {}
  std::string name() const override { return "stub"; }
  std::set<segmenters::PromptMode> prompt_modes() const override {
    return {segmenters::PromptMode::kPoints, segmenters::PromptMode::kBox,
            segmenters::PromptMode::kText};
  }
  std::vector<GrayImage> predict(const Frame& input,
                                 std::span<const segmenters::PromptBundle> prompts) const override;

 private:
  std::chrono::microseconds cost_;
};

}  // namespace tapseg::pipeline
