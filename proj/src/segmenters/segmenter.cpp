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

#include "tapseg/segmenters/segmenter.hpp"

#include <algorithm>
#include <cmath>

#include "tapseg/core/error.hpp"

namespace tapseg::segmenters {

namespace {

BinaryMask binarize(const GrayImage& prob, double threshold) {
  BinaryMask m(prob.height, prob.width);
  for (int r = 0; r < prob.height; ++r)
    for (int c = 0; c < prob.width; ++c) m.set(r, c, prob.at(r, c) >= threshold);
  return m;
}

GrayImage as_prob(const BinaryMask& m) {
  GrayImage g{m.height(), m.width(), std::vector<float>(m.bits().size())};
  for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] = m.bits()[i] ? 1.0f : 0.0f;
  return g;
}

void check_mode(const SegmenterAdapter& adapter, PromptMode mode) {
  if (!adapter.prompt_modes().contains(mode)) {
    fail(ErrorCode::kCapability,
         "segmenter '" + adapter.name() + "' does not support " + to_string(mode) + " prompts");
  }
}

void validate(const SegmenterAdapter& adapter, const Frame& frame, const PromptBundle& b) {
  require(!b.empty(), ErrorCode::kInvalidArgument,
          "prompt for instance " + std::to_string(b.instance_id) + " is empty");
  if (!b.positive_points.empty()) check_mode(adapter, PromptMode::kPoints);
  if (b.box) check_mode(adapter, PromptMode::kBox);
  if (b.text) check_mode(adapter, PromptMode::kText);
  for (const auto& p : b.positive_points) {
    require(frame.contains(p), ErrorCode::kInvalidArgument,
            "prompt point of instance " + std::to_string(b.instance_id) + " lies outside frame " +
                std::to_string(frame.index()));
  }
  if (b.box) validate_box(*b.box, frame.size());
}

BoxPrompt rescale_box(const BoxPrompt& box, Size src, Size dst) {
  const std::vector<Point> corners = {{box.x_min, box.y_min}, {box.x_max, box.y_max}};
  const auto out = rescale_points(corners, src, dst);
  return {out[0].x, out[0].y, out[1].x, out[1].y};
}

// Runs the adapter at its native resolution and maps masks back (nearest).
std::vector<BinaryMask> run(const SegmenterAdapter& adapter, const Frame& frame,
                            std::span<const PromptBundle> prompts, double threshold) {
  const Size size = frame.size();
  const auto native = adapter.native_input_hw();
  std::vector<PromptBundle> mapped(prompts.begin(), prompts.end());
  std::optional<Frame> resized;
  if (native && (native->height != size.height || native->width != size.width)) {
    resized = resize_frame(frame, *native);
    for (auto& b : mapped) {
      b.positive_points = rescale_points(b.positive_points, size, *native);
      if (b.box) b.box = rescale_box(*b.box, size, *native);
    }
  }
  const Frame& input = resized ? *resized : frame;
  std::vector<GrayImage> probs;
  try {
    probs = adapter.predict(input, mapped);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kSegmenterBackend) throw;
    fail(ErrorCode::kSegmenterBackend, "segmenter '" + adapter.name() + "': " + e.what());
  } catch (const std::exception& e) {
    fail(ErrorCode::kSegmenterBackend, "segmenter '" + adapter.name() + "': " + e.what());
  }
  if (probs.size() != prompts.size()) {
    fail(ErrorCode::kSegmenterBackend, "segmenter '" + adapter.name() + "' returned " +
                                           std::to_string(probs.size()) + " maps for " +
                                           std::to_string(prompts.size()) + " prompts");
  }
  std::vector<BinaryMask> out;
  out.reserve(probs.size());
  for (const auto& p : probs) {
    if (p.height != input.height() || p.width != input.width() ||
        p.data.size() != static_cast<std::size_t>(p.height) * p.width) {
      fail(ErrorCode::kSegmenterBackend,
           "segmenter '" + adapter.name() + "' returned a map of the wrong size");
    }
    BinaryMask m = binarize(p, threshold);
    out.push_back(resized ? resize_mask_nearest(m, size) : std::move(m));
  }
  return out;
}

}  // namespace

std::string to_string(PromptMode mode) {
  switch (mode) {
    case PromptMode::kPoints: return "points";
    case PromptMode::kBox: return "box";
    case PromptMode::kText: return "text";
  }
  return "?";
}

InstanceMaskSet segment(const SegmenterAdapter& adapter, const Frame& frame,
                        std::span<const PromptBundle> prompts) {
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    validate(adapter, frame, prompts[i]);
    for (std::size_t j = 0; j < i; ++j) {
      require(prompts[i].instance_id != prompts[j].instance_id, ErrorCode::kInvalidArgument,
              "instance " + std::to_string(prompts[i].instance_id) + " prompted twice");
    }
  }
  InstanceMaskSet set(frame.index(), frame.size());
  if (prompts.empty()) return set;
  auto masks = run(adapter, frame, prompts, kMaskThreshold);
  for (std::size_t i = 0; i < prompts.size(); ++i) set.insert(prompts[i].instance_id, std::move(masks[i]));
  return set;
}

InstanceMaskSet init_mask_from_text(const SegmenterAdapter& adapter, const Frame& frame,
                                    const std::string& text, double threshold,
                                    double min_area_fraction) {
  check_mode(adapter, PromptMode::kText);
  const PromptBundle bundle{0, {}, std::nullopt, text};
  const BinaryMask coarse = run(adapter, frame, std::span(&bundle, 1), threshold).front();
  const Components comps = connected_components(coarse);
  const double floor = min_area_fraction * frame.height() * frame.width();
  InstanceMaskSet set(frame.index(), frame.size());
  InstanceId next = 1;
  for (int label = 1; label <= comps.count(); ++label) {
    if (static_cast<double>(comps.areas[label - 1]) < floor) continue;
    set.insert(next++, component_mask(comps, label, frame.size()));
  }
  if (set.masks().empty()) {
    fail(ErrorCode::kEmptyRegion,
         "text prompt '" + text + "' produced no region above the area floor");
  }
  return set;
}

InstanceMaskSet init_mask_from_box(const SegmenterAdapter& adapter, const Frame& frame,
                                   std::span<const BoxPrompt> boxes) {
  check_mode(adapter, PromptMode::kBox);
  std::vector<PromptBundle> prompts;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    prompts.push_back({static_cast<InstanceId>(i + 1), {}, boxes[i], std::nullopt});
  }
  return segment(adapter, frame, prompts);
}

std::vector<GrayImage> ThresholdFloodSegmenter::predict(
    const Frame& input, std::span<const PromptBundle> prompts) const {
  const GrayImage gray = to_gray(input);
  const Size size = input.size();
  BinaryMask bright(size.height, size.width);
  for (int r = 0; r < size.height; ++r)
    for (int c = 0; c < size.width; ++c) bright.set(r, c, gray.at(r, c) >= threshold_);
  const Components comps = connected_components(bright);

  std::vector<GrayImage> out;
  for (const auto& b : prompts) {
    BinaryMask m(size.height, size.width);
    if (!b.positive_points.empty()) {
      std::vector<bool> chosen(static_cast<std::size_t>(comps.count()) + 1, false);
      for (const auto& p : b.positive_points) {
        if (!input.contains(p)) continue;
        const auto idx = static_cast<std::size_t>(std::floor(p.y)) * size.width +
                         static_cast<std::size_t>(std::floor(p.x));
        chosen[static_cast<std::size_t>(comps.labels[idx])] = true;
      }
      for (std::size_t i = 0; i < comps.labels.size(); ++i) {
        const int l = comps.labels[i];
        if (l > 0 && chosen[static_cast<std::size_t>(l)]) m.set(static_cast<int>(i) / size.width, static_cast<int>(i) % size.width, true);
      }
    } else if (b.box) {
      BinaryMask crop(size.height, size.width);
      for (int r = 0; r < size.height; ++r)
        for (int c = 0; c < size.width; ++c) {
          const Point q = cell_center(r, c);
          const bool inside = q.x >= b.box->x_min && q.x <= b.box->x_max &&
                              q.y >= b.box->y_min && q.y <= b.box->y_max;
          crop.set(r, c, inside && bright.at(r, c));
        }
      const Components local = connected_components(crop);
      if (local.count() > 0) {
        // Largest component; ties go to the earliest in raster order.
        const auto best = std::max_element(local.areas.begin(), local.areas.end()) - local.areas.begin();
        m = component_mask(local, static_cast<int>(best) + 1, size);
      }
    } else {
      m = bright;
    }
    out.push_back(as_prob(m));
  }
  return out;
}

}  // namespace tapseg::segmenters
