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

#include "tapseg/core/types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "tapseg/core/error.hpp"

namespace tapseg {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kDecode: return "decode";
    case ErrorCode::kEmptyRegion: return "empty_region";
    case ErrorCode::kCapability: return "capability";
    case ErrorCode::kOrdering: return "ordering";
    case ErrorCode::kTrackerBackend: return "tracker_backend";
    case ErrorCode::kSegmenterBackend: return "segmenter_backend";
    case ErrorCode::kAlignment: return "alignment";
    case ErrorCode::kManifest: return "manifest";
    case ErrorCode::kInsufficientData: return "insufficient_data";
    case ErrorCode::kConfiguration: return "configuration";
    case ErrorCode::kState: return "state";
    case ErrorCode::kNotFound: return "not_found";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

Frame::Frame(std::int64_t index, double timestamp_ms, int height, int width,
             std::vector<std::uint8_t> rgb)
    : index_(index), timestamp_ms_(timestamp_ms), height_(height), width_(width),
      rgb_(std::move(rgb)) {
  require(index >= 0, ErrorCode::kInvalidArgument, "frame index must be non-negative");
  require(timestamp_ms >= 0.0, ErrorCode::kInvalidArgument,
          "frame timestamp must be non-negative");
  require(height >= 1 && width >= 1, ErrorCode::kInvalidArgument,
          "frame dimensions must be positive");
  require(rgb_.size() == static_cast<std::size_t>(height) * width * 3,
          ErrorCode::kInvalidArgument, "pixel buffer does not match frame dimensions");
}

Frame Frame::reindexed(std::int64_t index, double timestamp_ms) const {
  return Frame(index, timestamp_ms, height_, width_, rgb_);
}

bool Frame::contains(const Point& p) const {
  return is_finite(p) && p.x >= 0.0 && p.y >= 0.0 && p.x < width_ && p.y < height_;
}

BinaryMask::BinaryMask(int height, int width)
    : height_(height), width_(width) {
  require(height >= 1 && width >= 1, ErrorCode::kInvalidArgument,
          "mask dimensions must be positive");
  bits_.assign(static_cast<std::size_t>(height) * width, 0);
}

BinaryMask::BinaryMask(int height, int width, std::vector<std::uint8_t> bits)
    : height_(height), width_(width), bits_(std::move(bits)) {
  require(height >= 1 && width >= 1, ErrorCode::kInvalidArgument,
          "mask dimensions must be positive");
  require(bits_.size() == static_cast<std::size_t>(height) * width,
          ErrorCode::kInvalidArgument, "mask buffer does not match dimensions");
  for (auto& b : bits_) b = b ? 1 : 0;
}

bool BinaryMask::contains(const Point& p) const {
  if (!is_finite(p)) return false;
  const double row = std::floor(p.y);
  const double col = std::floor(p.x);
  if (row < 0 || col < 0 || row >= height_ || col >= width_) return false;
  return at(static_cast<int>(row), static_cast<int>(col));
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::size_t TrackedPointSet::visible_count() const {
  return static_cast<std::size_t>(std::count(visible.begin(), visible.end(), true));
}

void InstanceMaskSet::insert(InstanceId id, BinaryMask mask) {
  require(id >= 0, ErrorCode::kInvalidArgument, "instance ids must be non-negative");
  if (size_.height == 0 && size_.width == 0) size_ = mask.size();
  require(mask.size() == size_, ErrorCode::kInvalidArgument,
          "instance masks must share identical dimensions");
  require(masks_.count(id) == 0, ErrorCode::kInvalidArgument,
          "duplicate instance id " + std::to_string(id));
  masks_.emplace(id, std::move(mask));
}

const BinaryMask& InstanceMaskSet::at(InstanceId id) const {
  auto it = masks_.find(id);
  require(it != masks_.end(), ErrorCode::kNotFound,
          "no mask for instance " + std::to_string(id));
  return it->second;
}

BinaryMask InstanceMaskSet::merged() const {
  BinaryMask out(std::max(size_.height, 1), std::max(size_.width, 1));
  for (const auto& [id, mask] : masks_) {
    auto dst = out.bits();
    auto src = mask.bits();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] |= src[i];
  }
  return out;
}

void validate_box(const BoxPrompt& box, Size frame) {
  const bool finite = std::isfinite(box.x_min) && std::isfinite(box.x_max) &&
                      std::isfinite(box.y_min) && std::isfinite(box.y_max);
  require(finite, ErrorCode::kInvalidArgument, "box coordinates must be finite");
  require(box.x_min < box.x_max && box.y_min < box.y_max, ErrorCode::kInvalidArgument,
          "box has zero or negative area");
  const bool intersects = box.x_max > 0.0 && box.y_max > 0.0 &&
                          box.x_min < frame.width && box.y_min < frame.height;
  require(intersects, ErrorCode::kInvalidArgument, "box lies outside the frame");
}

std::vector<Point> rescale_points(std::span<const Point> points, Size src, Size dst) {
  if (src.height <= 0 || src.width <= 0 || dst.height <= 0 || dst.width <= 0) {
    std::ostringstream msg;
    msg << "rescale_points: non-positive dimension (src " << src.height << "x" << src.width
        << ", dst " << dst.height << "x" << dst.width << ")";
    fail(ErrorCode::kInvalidArgument, msg.str());
  }
  const double sx = static_cast<double>(dst.width) / src.width;
  const double sy = static_cast<double>(dst.height) / src.height;
  std::vector<Point> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back({p.x * sx, p.y * sy});
  return out;
}

bool is_finite(const Point& p) { return std::isfinite(p.x) && std::isfinite(p.y); }

}  // namespace tapseg
