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

#include "tapseg/trackers/tracker.hpp"

#include <cmath>
#include <map>

#include "tapseg/core/error.hpp"
#include "tapseg/core/image.hpp"
#include "tapseg/kernels/kernels.hpp"

namespace tapseg::trackers {

namespace {

template <typename F>
auto guarded(const TrackerAdapter& adapter, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kTrackerBackend || e.code() == ErrorCode::kIo ||
        e.code() == ErrorCode::kDecode) {
      fail(ErrorCode::kTrackerBackend, "tracker '" + adapter.name() + "': " + e.what());
    }
    throw;
  } catch (const std::exception& e) {
    fail(ErrorCode::kTrackerBackend, "tracker '" + adapter.name() + "': " + e.what());
  }
}

}  // namespace

TrackerSession::TrackerSession(std::shared_ptr<const TrackerAdapter> adapter,
                               const Frame& first_frame, std::vector<QueryPointSet> queries,
                               int window_size)
    : adapter_(std::move(adapter)), queries_(std::move(queries)) {
  require(adapter_ != nullptr, ErrorCode::kInvalidArgument, "tracker session without adapter");
  require(window_size >= 1, ErrorCode::kInvalidArgument, "window_size must be positive");
  require(!queries_.empty(), ErrorCode::kInvalidArgument, "tracker_init: empty query list");
  window_size_ = static_cast<std::size_t>(window_size);
  validate_queries(queries_, first_frame);
  for (auto& q : queries_) q.birth_frame = first_frame.index();
  backend_ = guarded(*adapter_, [&] { return adapter_->open(); });
  buffer_.push_back(first_frame);
  latest_ = checked(guarded(*adapter_, [&] { return backend_->init(first_frame, queries_); }),
                    first_frame.index());
  // At the birth frame the tracks are the queries themselves.
  for (std::size_t i = 0; i < latest_.size(); ++i) {
    latest_[i].points = queries_[i].points;
    latest_[i].visible.assign(queries_[i].points.size(), true);
  }
}

void TrackerSession::validate_queries(std::span<const QueryPointSet> queries,
                                      const Frame& frame) const {
  for (const auto& q : queries) {
    require(!q.points.empty(), ErrorCode::kInvalidArgument,
            "instance " + std::to_string(q.instance_id) + " has no query points");
    for (const auto& p : q.points) {
      if (!frame.contains(p)) {
        fail(ErrorCode::kInvalidArgument, "query point (" + std::to_string(p.x) + ", " +
                                              std::to_string(p.y) + ") of instance " +
                                              std::to_string(q.instance_id) +
                                              " lies outside frame " + std::to_string(frame.index()));
      }
    }
  }
  for (std::size_t i = 0; i < queries.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      require(queries[i].instance_id != queries[j].instance_id, ErrorCode::kInvalidArgument,
              "instance " + std::to_string(queries[i].instance_id) + " appears twice");
    }
  }
}

std::vector<TrackedPointSet> TrackerSession::checked(std::vector<TrackedPointSet> result,
                                                     std::int64_t frame_index) const {
  if (result.size() != queries_.size()) {
    fail(ErrorCode::kTrackerBackend, "tracker '" + adapter_->name() + "' returned " +
                                         std::to_string(result.size()) + " instances, expected " +
                                         std::to_string(queries_.size()));
  }
  for (std::size_t i = 0; i < result.size(); ++i) {
    auto& set = result[i];
    const auto& q = queries_[i];
    if (set.instance_id != q.instance_id || set.points.size() != q.points.size() ||
        set.visible.size() != q.points.size()) {
      fail(ErrorCode::kTrackerBackend,
           "tracker '" + adapter_->name() + "' broke point correspondence for instance " +
               std::to_string(q.instance_id));
    }
    for (std::size_t k = 0; k < set.points.size(); ++k) {
      if (!is_finite(set.points[k])) {
        fail(ErrorCode::kTrackerBackend,
             "tracker '" + adapter_->name() + "' produced a non-finite position");
      }
      // Out-of-frame positions can never be visible.
      const auto& p = set.points[k];
      const auto& f = buffer_.back();
      if (!(p.x >= 0 && p.y >= 0 && p.x < f.width() && p.y < f.height())) set.visible[k] = false;
    }
    if (!adapter_->capabilities().supports_visibility) set.visible.assign(set.points.size(), true);
    set.frame_index = frame_index;
  }
  return result;
}

std::vector<TrackedPointSet> TrackerSession::step(const Frame& frame) {
  if (frame.index() <= buffer_.back().index()) {
    fail(ErrorCode::kOrdering, "tracker_step: frame " + std::to_string(frame.index()) +
                                   " does not follow frame " +
                                   std::to_string(buffer_.back().index()));
  }
  // The buffer only advances once the backend has accepted the frame.
  std::vector<Frame> window(buffer_.begin() + (buffer_.size() == window_size_ ? 1 : 0),
                            buffer_.end());
  window.push_back(frame);
  auto result = guarded(*adapter_, [&] { return backend_->step(window); });
  if (buffer_.size() == window_size_) buffer_.pop_front();
  buffer_.push_back(frame);
  latest_ = checked(std::move(result), frame.index());
  return latest_;
}

std::vector<std::vector<TrackedPointSet>> TrackerSession::step_many(std::span<const Frame> frames) {
  std::vector<std::vector<TrackedPointSet>> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(step(f));
  return out;
}

std::vector<TrackedPointSet> TrackerSession::add_queries(std::vector<QueryPointSet> queries,
                                                         const Frame& at) {
  if (!adapter_->capabilities().supports_midstream_queries) {
    fail(ErrorCode::kCapability,
         "tracker '" + adapter_->name() + "' does not accept mid-stream queries");
  }
  require(!queries.empty(), ErrorCode::kInvalidArgument, "tracker_add_queries: nothing to add");
  if (at.index() != buffer_.back().index()) {
    fail(ErrorCode::kOrdering, "tracker_add_queries: frame " + std::to_string(at.index()) +
                                   " is not the latest tracked frame " +
                                   std::to_string(buffer_.back().index()));
  }
  for (const auto& q : queries) {
    require(!q.points.empty(), ErrorCode::kInvalidArgument,
            "instance " + std::to_string(q.instance_id) + " has no query points");
    for (const auto& p : q.points) {
      require(at.contains(p), ErrorCode::kInvalidArgument,
              "added query point of instance " + std::to_string(q.instance_id) +
                  " lies outside frame " + std::to_string(at.index()));
    }
    for (const auto& existing : queries_) {
      require(existing.instance_id != q.instance_id, ErrorCode::kInvalidArgument,
              "instance " + std::to_string(q.instance_id) + " is already tracked");
    }
  }
  for (auto& q : queries) q.birth_frame = at.index();
  guarded(*adapter_, [&] { return backend_->add(queries, at); });
  for (auto& q : queries) {
    queries_.push_back(q);
    latest_.push_back({q.instance_id, at.index(), q.points,
                       std::vector<bool>(q.points.size(), true)});
  }
  return latest_;
}

void TrackerSession::remove_instance(InstanceId id) {
  for (std::size_t i = 0; i < queries_.size(); ++i) {
    if (queries_[i].instance_id != id) continue;
    guarded(*adapter_, [&] {
      backend_->remove(id);
      return 0;
    });
    queries_.erase(queries_.begin() + static_cast<std::ptrdiff_t>(i));
    latest_.erase(latest_.begin() + static_cast<std::ptrdiff_t>(i));
    return;
  }
  fail(ErrorCode::kNotFound, "instance " + std::to_string(id) + " is not tracked");
}

// ---------------------------------------------------------------------------

namespace {

class OracleBackend : public TrackerBackend {
 public:
  explicit OracleBackend(std::shared_ptr<const MotionField> field) : field_(std::move(field)) {}

  std::vector<TrackedPointSet> init(const Frame& first,
                                    std::span<const QueryPointSet> queries) override {
    queries_.assign(queries.begin(), queries.end());
    return at(first.index());
  }

  std::vector<TrackedPointSet> step(std::span<const Frame> window) override {
    return at(window.back().index());
  }

  std::vector<TrackedPointSet> add(std::span<const QueryPointSet> queries,
                                   const Frame& frame) override {
    queries_.insert(queries_.end(), queries.begin(), queries.end());
    return at(frame.index());
  }

  void remove(InstanceId id) override {
    std::erase_if(queries_, [id](const QueryPointSet& q) { return q.instance_id == id; });
  }

 private:
  std::vector<TrackedPointSet> at(std::int64_t t) const {
    std::vector<TrackedPointSet> out;
    for (const auto& q : queries_) {
      TrackedPointSet set{q.instance_id, t, {}, {}};
      for (const auto& p : q.points) {
        set.points.push_back(field_->position(p, q.birth_frame, t));
        set.visible.push_back(field_->visible(p, q.birth_frame, t));
      }
      out.push_back(std::move(set));
    }
    return out;
  }

  std::shared_ptr<const MotionField> field_;
  std::vector<QueryPointSet> queries_;
};

class NccBackend : public TrackerBackend {
 public:
  explicit NccBackend(NccTrackerOptions options) : options_(options) {}

  std::vector<TrackedPointSet> init(const Frame& first,
                                    std::span<const QueryPointSet> queries) override {
    instances_.clear();
    auto gray = std::make_shared<const GrayImage>(to_gray(first));
    for (const auto& q : queries) append(q, gray);
    return snapshot(first.index());
  }

  std::vector<TrackedPointSet> step(std::span<const Frame> window) override {
    const Frame& frame = window.back();
    auto cur = std::make_shared<const GrayImage>(to_gray(frame));

    // Batch every track per template image so the kernel runs once per group.
    std::map<const GrayImage*, std::vector<Track*>> groups;
    for (auto& inst : instances_) {
      for (auto& t : inst.tracks) groups[t.tmpl.get()].push_back(&t);
    }
    for (auto& [tmpl, tracks] : groups) {
      std::vector<kernels::NccQuery> queries;
      queries.reserve(tracks.size());
      for (Track* t : tracks) queries.push_back({t->tmpl_pos, {t->pos.x + t->vx, t->pos.y + t->vy}});
      const auto matches = kernels::ncc_match(*tmpl, *cur, queries,
                                              {options_.patch_radius, options_.search_radius});
      for (std::size_t i = 0; i < tracks.size(); ++i) update(*tracks[i], matches[i], frame, cur);
    }
    return snapshot(frame.index());
  }

  std::vector<TrackedPointSet> add(std::span<const QueryPointSet> queries,
                                   const Frame& frame) override {
    auto gray = std::make_shared<const GrayImage>(to_gray(frame));
    for (const auto& q : queries) append(q, gray);
    return snapshot(frame.index());
  }

  void remove(InstanceId id) override {
    std::erase_if(instances_, [id](const Instance& i) { return i.id == id; });
  }

 private:
  struct Track {
    Point pos;
    double vx = 0.0;
    double vy = 0.0;
    bool visible = true;
    std::shared_ptr<const GrayImage> tmpl;
    Point tmpl_pos;
  };
  struct Instance {
    InstanceId id;
    std::vector<Track> tracks;
  };

  void append(const QueryPointSet& q, const std::shared_ptr<const GrayImage>& gray) {
    Instance inst{q.instance_id, {}};
    for (const auto& p : q.points) inst.tracks.push_back({p, 0.0, 0.0, true, gray, p});
    instances_.push_back(std::move(inst));
  }

  void update(Track& t, const kernels::NccMatch& m, const Frame& frame,
              const std::shared_ptr<const GrayImage>& cur) const {
    const Point predicted{t.pos.x + t.vx, t.pos.y + t.vy};
    if (m.score >= options_.min_correlation) {
      const Point found{t.tmpl_pos.x + m.dx, t.tmpl_pos.y + m.dy};
      if (frame.contains(found)) {
        t.vx = found.x - t.pos.x;
        t.vy = found.y - t.pos.y;
        t.pos = found;
        t.visible = true;
        t.tmpl = cur;
        t.tmpl_pos = found;
        return;
      }
    }
    t.pos = predicted;
    t.visible = false;
  }

  std::vector<TrackedPointSet> snapshot(std::int64_t index) const {
    std::vector<TrackedPointSet> out;
    for (const auto& inst : instances_) {
      TrackedPointSet set{inst.id, index, {}, {}};
      for (const auto& t : inst.tracks) {
        set.points.push_back(t.pos);
        set.visible.push_back(t.visible);
      }
      out.push_back(std::move(set));
    }
    return out;
  }

  NccTrackerOptions options_;
  std::vector<Instance> instances_;
};

}  // namespace

std::unique_ptr<TrackerBackend> OracleTracker::open() const {
  return std::make_unique<OracleBackend>(field_);
}

std::unique_ptr<TrackerBackend> NccBlockTracker::open() const {
  return std::make_unique<NccBackend>(options_);
}

}  // namespace tapseg::trackers
