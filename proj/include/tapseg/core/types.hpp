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

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tapseg {

// Continuous pixel coordinates: x is the column, y is the row, origin at the
// top-left corner of pixel (0, 0). Pixel (r, c) covers [c, c+1) x [r, r+1).
struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

struct Size {
  int height = 0;
  int width = 0;

  friend bool operator==(const Size&, const Size&) = default;
};

// Immutable RGB image with a frame ordinal and a capture timestamp.
class Frame {
 public:
  Frame() = default;
  Frame(std::int64_t index, double timestamp_ms, int height, int width,
        std::vector<std::uint8_t> rgb);

  std::int64_t index() const { return index_; }
  double timestamp_ms() const { return timestamp_ms_; }
  int height() const { return height_; }
  int width() const { return width_; }
  Size size() const { return {height_, width_}; }
  bool empty() const { return rgb_.empty(); }

  std::span<const std::uint8_t> rgb() const { return rgb_; }
  const std::uint8_t* pixel(int row, int col) const {
    return rgb_.data() + (static_cast<std::size_t>(row) * width_ + col) * 3;
  }

  // Same pixels, different ordinal/timestamp.
  Frame reindexed(std::int64_t index, double timestamp_ms) const;

  bool contains(const Point& p) const;

 private:
  std::int64_t index_ = 0;
  double timestamp_ms_ = 0.0;
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> rgb_;
};

class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int height, int width);
  BinaryMask(int height, int width, std::vector<std::uint8_t> bits);

  int height() const { return height_; }
  int width() const { return width_; }
  Size size() const { return {height_, width_}; }
  std::size_t area() const { return bits_.size(); }

  bool at(int row, int col) const {
    return bits_[static_cast<std::size_t>(row) * width_ + col] != 0;
  }
  void set(int row, int col, bool value) {
    bits_[static_cast<std::size_t>(row) * width_ + col] = value ? 1 : 0;
  }

  // Membership of a continuous point: cell (floor(y), floor(x)).
  bool contains(const Point& p) const;

  std::size_t count() const;
  bool none() const { return count() == 0; }

  std::span<const std::uint8_t> bits() const { return bits_; }
  std::span<std::uint8_t> bits() { return bits_; }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> bits_;  // row-major, 0 or 1
};

using InstanceId = std::int64_t;

struct QueryPointSet {
  InstanceId instance_id = 0;
  std::vector<Point> points;
  std::int64_t birth_frame = 0;
};

struct TrackedPointSet {
  InstanceId instance_id = 0;
  std::int64_t frame_index = 0;
  std::vector<Point> points;
  std::vector<bool> visible;

  std::size_t visible_count() const;
};

// All member masks share identical dimensions; std::map keeps ids unique
// and iteration ordered.
class InstanceMaskSet {
 public:
  InstanceMaskSet() = default;
  InstanceMaskSet(std::int64_t frame_index, Size size)
      : frame_index_(frame_index), size_(size) {}

  std::int64_t frame_index() const { return frame_index_; }
  void set_frame_index(std::int64_t index) { frame_index_ = index; }
  Size size() const { return size_; }

  void insert(InstanceId id, BinaryMask mask);
  bool has(InstanceId id) const { return masks_.count(id) != 0; }
  const BinaryMask& at(InstanceId id) const;
  const std::map<InstanceId, BinaryMask>& masks() const { return masks_; }
  std::size_t size_instances() const { return masks_.size(); }
  bool empty() const { return masks_.empty(); }

  // Union over all instances; empty mask of `size()` when there are none.
  BinaryMask merged() const;

  friend bool operator==(const InstanceMaskSet&, const InstanceMaskSet&) = default;

 private:
  std::int64_t frame_index_ = 0;
  Size size_{};
  std::map<InstanceId, BinaryMask> masks_;
};

struct BoxPrompt {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;
};

// Throws kInvalidArgument when the box is degenerate or misses the frame.
void validate_box(const BoxPrompt& box, Size frame);

std::vector<Point> rescale_points(std::span<const Point> points, Size src, Size dst);

// Center of pixel cell (row, col).
inline Point cell_center(int row, int col) { return {col + 0.5, row + 0.5}; }

bool is_finite(const Point& p);

}  // namespace tapseg
