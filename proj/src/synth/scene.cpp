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

#include "tapseg/synth/scene.hpp"

#include <cmath>

#include "tapseg/core/error.hpp"

namespace tapseg::synth {

namespace {

std::uint32_t hash3(std::int64_t a, std::int64_t b, std::uint64_t seed) {
  std::uint64_t z = seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(a) * 0xbf58476d1ce4e5b9ULL +
                    static_cast<std::uint64_t>(b) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  z *= 0xd6e8feb86659fd93ULL;
  z ^= z >> 32;
  return static_cast<std::uint32_t>(z);
}

// Blocky noise (2x2 cells) keeps NCC peaks sharp but not single-pixel.
std::uint8_t texture(std::int64_t x, std::int64_t y, std::uint64_t seed, int lo, int hi) {
  const auto cell = hash3(x >> 1, y >> 1, seed) % 1000;
  const auto fine = hash3(x, y, seed ^ 0x5bd1e995ULL) % 1000;
  const double v = lo + (hi - lo) * (0.7 * cell + 0.3 * fine) / 999.0;
  return static_cast<std::uint8_t>(std::lround(v));
}

std::int64_t shift(double v, std::int64_t dt) { return std::lround(v * static_cast<double>(dt)); }

}  // namespace

Point Disk::center_at(std::int64_t t) const {
  const double dt = static_cast<double>(t - birth_frame);
  return {cx + vx * dt, cy + vy * dt};
}

bool Disk::covers(int row, int col, std::int64_t t) const {
  if (t < birth_frame) return false;
  const Point c = center_at(t);
  const double dx = col + 0.5 - c.x;
  const double dy = row + 0.5 - c.y;
  return dx * dx + dy * dy <= radius * radius;
}

bool Occluder::covers(int row, int col, std::int64_t t) const {
  return t >= first_frame && t <= last_frame && col >= x0 && col < x1 && row >= y0 && row < y1;
}

Frame Scene::render(std::int64_t t) const {
  require(t >= 0, ErrorCode::kInvalidArgument, "scene: negative frame index");
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(height) * width * 3);
  const std::int64_t bx = shift(pan_x, t);
  const std::int64_t by = shift(pan_y, t);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      std::uint8_t v = texture(c - bx, r - by, seed, 5, 100);
      for (std::size_t i = 0; i < disks.size(); ++i) {
        const Disk& d = disks[i];
        if (!d.covers(r, c, t)) continue;
        const std::int64_t dt = t - d.birth_frame;
        v = texture(c - shift(d.vx, dt), r - shift(d.vy, dt), seed + 101 * (d.id + 1), 150, 255);
      }
      for (const auto& o : occluders) {
        if (o.covers(r, c, t)) v = texture(c, r, seed + 7777, 10, 90);
      }
      auto* px = &rgb[(static_cast<std::size_t>(r) * width + c) * 3];
      px[0] = v;
      px[1] = static_cast<std::uint8_t>(v * 0.9);
      px[2] = static_cast<std::uint8_t>(v * 0.8);
    }
  }
  return Frame(t, frame_interval_ms * static_cast<double>(t), height, width, std::move(rgb));
}

InstanceMaskSet Scene::ground_truth(std::int64_t t) const {
  InstanceMaskSet set(t, {height, width});
  for (std::size_t i = 0; i < disks.size(); ++i) {
    const Disk& d = disks[i];
    if (t < d.birth_frame) continue;
    BinaryMask m(height, width);
    for (int r = 0; r < height; ++r) {
      for (int c = 0; c < width; ++c) {
        if (!d.covers(r, c, t)) continue;
        bool hidden = false;
        for (std::size_t j = i + 1; j < disks.size() && !hidden; ++j) hidden = disks[j].covers(r, c, t);
        for (const auto& o : occluders) hidden = hidden || o.covers(r, c, t);
        if (!hidden) m.set(r, c, true);
      }
    }
    set.insert(d.id, std::move(m));
  }
  return set;
}

const Disk* Scene::owner(const Point& query, std::int64_t birth) const {
  const int row = static_cast<int>(std::floor(query.y));
  const int col = static_cast<int>(std::floor(query.x));
  for (auto it = disks.rbegin(); it != disks.rend(); ++it) {
    if (it->covers(row, col, birth)) return &*it;
  }
  return nullptr;
}

Point Scene::position(const Point& query, std::int64_t birth, std::int64_t t) const {
  if (const Disk* d = owner(query, birth)) {
    const double dt = static_cast<double>(t - birth);
    return {query.x + d->vx * dt, query.y + d->vy * dt};
  }
  return {query.x + static_cast<double>(shift(pan_x, t) - shift(pan_x, birth)),
          query.y + static_cast<double>(shift(pan_y, t) - shift(pan_y, birth))};
}

bool Scene::visible(const Point& query, std::int64_t birth, std::int64_t t) const {
  const Point p = position(query, birth, t);
  if (!(p.x >= 0 && p.y >= 0 && p.x < width && p.y < height)) return false;
  const int row = static_cast<int>(std::floor(p.y));
  const int col = static_cast<int>(std::floor(p.x));
  for (const auto& o : occluders) {
    if (o.covers(row, col, t)) return false;
  }
  const Disk* d = owner(query, birth);
  // Anything drawn above the owner hides the point.
  bool above = d == nullptr;
  for (const auto& other : disks) {
    if (above && other.covers(row, col, t)) return false;
    if (&other == d) above = true;
  }
  return d == nullptr || d->covers(row, col, t);
}

namespace {

class SceneMotion : public trackers::MotionField {
 public:
  explicit SceneMotion(Scene scene) : scene_(std::move(scene)) {}
  Point position(const Point& q, std::int64_t birth, std::int64_t t) const override {
    return scene_.position(q, birth, t);
  }
  bool visible(const Point& q, std::int64_t birth, std::int64_t t) const override {
    return scene_.visible(q, birth, t);
  }

 private:
  Scene scene_;
};

}  // namespace

std::shared_ptr<const trackers::MotionField> motion_field(Scene scene) {
  return std::make_shared<SceneMotion>(std::move(scene));
}

nlohmann::json to_json(const Scene& s) {
  nlohmann::json disks = nlohmann::json::array();
  for (const auto& d : s.disks) {
    disks.push_back({{"id", d.id}, {"cx", d.cx}, {"cy", d.cy}, {"radius", d.radius},
                     {"vx", d.vx}, {"vy", d.vy}, {"birth_frame", d.birth_frame}});
  }
  nlohmann::json occ = nlohmann::json::array();
  for (const auto& o : s.occluders) {
    occ.push_back({{"x0", o.x0}, {"y0", o.y0}, {"x1", o.x1}, {"y1", o.y1},
                   {"first_frame", o.first_frame}, {"last_frame", o.last_frame}});
  }
  return {{"height", s.height}, {"width", s.width}, {"num_frames", s.num_frames},
          {"frame_interval_ms", s.frame_interval_ms}, {"seed", s.seed},
          {"pan_x", s.pan_x}, {"pan_y", s.pan_y}, {"disks", disks}, {"occluders", occ}};
}

Scene scene_from_json(const nlohmann::json& j) {
  try {
    Scene s;
    s.height = j.at("height").get<int>();
    s.width = j.at("width").get<int>();
    s.num_frames = j.at("num_frames").get<std::int64_t>();
    s.frame_interval_ms = j.value("frame_interval_ms", 40.0);
    s.seed = j.value("seed", std::uint64_t{0});
    s.pan_x = j.value("pan_x", 0.0);
    s.pan_y = j.value("pan_y", 0.0);
    for (const auto& d : j.value("disks", nlohmann::json::array())) {
      s.disks.push_back({d.at("id").get<InstanceId>(), d.at("cx").get<double>(),
                         d.at("cy").get<double>(), d.at("radius").get<double>(),
                         d.value("vx", 0.0), d.value("vy", 0.0),
                         d.value("birth_frame", std::int64_t{0})});
    }
    for (const auto& o : j.value("occluders", nlohmann::json::array())) {
      s.occluders.push_back({o.at("x0").get<int>(), o.at("y0").get<int>(), o.at("x1").get<int>(),
                             o.at("y1").get<int>(), o.at("first_frame").get<std::int64_t>(),
                             o.at("last_frame").get<std::int64_t>()});
    }
    require(s.height > 0 && s.width > 0 && s.num_frames > 0, ErrorCode::kConfiguration,
            "scene: dimensions and frame count must be positive");
    return s;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfiguration, std::string("scene: ") + e.what());
  }
}

Scene moving_disk_scene(std::uint64_t seed) {
  Scene s;
  s.height = 120;
  s.width = 200;
  s.num_frames = 100;
  s.seed = seed;
  s.disks.push_back({1, 40.0, 60.0, 22.0, 1.0, 0.0, 0});
  return s;
}

Scene occlusion_scene(std::uint64_t seed) {
  Scene s = moving_disk_scene(seed);
  s.occluders.push_back({50, 10, 150, 110, 40, 49});
  return s;
}

Scene two_object_scene(std::uint64_t seed) {
  Scene s;
  s.height = 120;
  s.width = 200;
  s.num_frames = 100;
  s.seed = seed;
  s.disks.push_back({1, 50.0, 35.0, 20.0, 1.0, 0.0, 0});
  s.disks.push_back({2, 150.0, 90.0, 18.0, -1.0, 0.0, 30});
  return s;
}

Scene panning_scene(double vx, double vy, std::int64_t frames, std::uint64_t seed) {
  Scene s;
  s.height = 120;
  s.width = 160;
  s.num_frames = frames;
  s.seed = seed;
  s.pan_x = vx;
  s.pan_y = vy;
  return s;
}

}  // namespace tapseg::synth
