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

#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "tapseg/core/image.hpp"
#include "tapseg/core/types.hpp"

namespace tapseg::segmenters {

enum class PromptMode { kPoints, kBox, kText };

std::string to_string(PromptMode mode);

// Prompts for one instance, in frame coordinates. Positive points only.
struct PromptBundle {
  InstanceId instance_id = 0;
  std::vector<Point> positive_points;
  std::optional<BoxPrompt> box;
  std::optional<std::string> text;

  bool empty() const { return positive_points.empty() && !box && !text; }
};

// A promptable segmenter. predict() sees the frame already resampled to
// native_input_hw (when set) and prompts mapped into those coordinates; it
// returns one probability map per bundle at that resolution.
class SegmenterAdapter {
 public:
  virtual ~SegmenterAdapter() = default;
  virtual std::string name() const = 0;
  virtual std::set<PromptMode> prompt_modes() const = 0;
  virtual std::optional<Size> native_input_hw() const { return std::nullopt; }
  virtual std::vector<GrayImage> predict(const Frame& input,
                                         std::span<const PromptBundle> prompts) const = 0;
};

constexpr double kMaskThreshold = 0.5;
constexpr double kTextComponentFloor = 0.005;

// One mask per bundle at frame resolution. Errors: kInvalidArgument for
// empty bundles or points/boxes outside the frame; kCapability for a prompt
// mode the adapter lacks; kSegmenterBackend when the adapter fails.
InstanceMaskSet segment(const SegmenterAdapter& adapter, const Frame& frame,
                        std::span<const PromptBundle> prompts);

// Coarse text-prompted map split into connected components; each component
// covering at least `min_area_fraction` of the frame becomes an instance
// (ids 1.. in raster order). Errors: kEmptyRegion when nothing survives.
InstanceMaskSet init_mask_from_text(const SegmenterAdapter& adapter, const Frame& frame,
                                    const std::string& text, double threshold = kMaskThreshold,
                                    double min_area_fraction = kTextComponentFloor);

// One instance per box, ids 1.. in input order.
InstanceMaskSet init_mask_from_box(const SegmenterAdapter& adapter, const Frame& frame,
                                   std::span<const BoxPrompt> boxes);

// Thresholds the luma image. Point prompts select the union of bright
// components under the points; a box selects the largest bright component
// of the box crop; text returns the whole bright map as the coarse map.
// Points win over a box when both are given.
class ThresholdFloodSegmenter : public SegmenterAdapter {
 public:
  explicit ThresholdFloodSegmenter(double intensity_threshold = 128.0,
                                   std::optional<Size> native_hw = std::nullopt)
      : threshold_(intensity_threshold), native_(native_hw) {}

  std::string name() const override { return "threshold_flood"; }
  std::set<PromptMode> prompt_modes() const override {
    return {PromptMode::kPoints, PromptMode::kBox, PromptMode::kText};
  }
  std::optional<Size> native_input_hw() const override { return native_; }
  std::vector<GrayImage> predict(const Frame& input,
                                 std::span<const PromptBundle> prompts) const override;

 private:
  double threshold_;
  std::optional<Size> native_;
};

}  // namespace tapseg::segmenters
