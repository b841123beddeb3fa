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
#include <optional>
#include <vector>

#include "json.hpp"
#include "tapseg/core/types.hpp"
#include "tapseg/trackers/tracker.hpp"

namespace tapseg::synth {

// Textured bright disk moving at constant velocity. Pixel (r, c) belongs to
// the disk at frame t when its cell center lies within `radius` of the
// center at t.
struct Disk {
  InstanceId id = 0;
  double cx = 0.0;
  double cy = 0.0;
  double radius = 10.0;
  double vx = 0.0;
  double vy = 0.0;
  std::int64_t birth_frame = 0;

  Point center_at(std::int64_t t) const;
  bool covers(int row, int col, std::int64_t t) const;
};

// Dark textured rectangle drawn over everything during [first, last].
struct Occluder {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;  // exclusive
  int y1 = 0;  // exclusive
  std::int64_t first_frame = 0;
  std::int64_t last_frame = 0;

  bool covers(int row, int col, std::int64_t t) const;
};

// Deterministic synthetic video with analytic ground truth. Background and
// occluders stay below intensity 110, disks stay at or above 150, so a
// 128 threshold separates them exactly.
struct Scene {
  int height = 120;
  int width = 160;
  std::int64_t num_frames = 100;
  double frame_interval_ms = 40.0;
  std::uint64_t seed = 0;
  double pan_x = 0.0;  // background translation, px/frame (rounded per frame)
  double pan_y = 0.0;
  std::vector<Disk> disks;
  std::vector<Occluder> occluders;

  Frame render(std::int64_t t) const;

  // Visible pixels of every disk alive at t (disks later in the list are on
  // top; occluders hide everything beneath).
  InstanceMaskSet ground_truth(std::int64_t t) const;

  // Analytic motion of a point issued at `birth`: it belongs to the topmost
  // disk covering it at birth, else to the background.
  Point position(const Point& query, std::int64_t birth, std::int64_t t) const;
  bool visible(const Point& query, std::int64_t birth, std::int64_t t) const;

  const Disk* owner(const Point& query, std::int64_t birth) const;
};

// Exposes a scene's analytic motion to the oracle tracker.
std::shared_ptr<const trackers::MotionField> motion_field(Scene scene);

nlohmann::json to_json(const Scene& scene);
Scene scene_from_json(const nlohmann::json& j);

// 100-frame moving-disk video used throughout the tests.
Scene moving_disk_scene(std::uint64_t seed = 0);
// Same disk passing behind an occluder (fully hidden for a stretch).
Scene occlusion_scene(std::uint64_t seed = 0);
// Two disks; the second appears at frame 30.
Scene two_object_scene(std::uint64_t seed = 0);
// Whole-image rigid translation over a textured background.
Scene panning_scene(double vx, double vy, std::int64_t frames, std::uint64_t seed = 0);

}  // namespace tapseg::synth
