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
#include <deque>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tapseg/core/types.hpp"

namespace tapseg::trackers {

constexpr int kDefaultWindowSize = 4;

struct TrackerCapabilities {
  bool supports_visibility = true;
  bool supports_midstream_queries = true;
};

// Adapter-owned per-session state. Positions come back in the same order as
// the query points they descend from.
class TrackerBackend {
 public:
  virtual ~TrackerBackend() = default;

  virtual std::vector<TrackedPointSet> init(const Frame& first,
                                            std::span<const QueryPointSet> queries) = 0;
  // `window` holds the buffered frames, oldest first; window.back() is the
  // frame to track into.
  virtual std::vector<TrackedPointSet> step(std::span<const Frame> window) = 0;
  virtual std::vector<TrackedPointSet> add(std::span<const QueryPointSet> queries,
                                           const Frame& at) = 0;
  virtual void remove(InstanceId id) = 0;
};

// A point tracker (in-process or remote). Must be safe to open() from
// several sessions at once.
class TrackerAdapter {
 public:
  virtual ~TrackerAdapter() = default;
  virtual std::string name() const = 0;
  virtual TrackerCapabilities capabilities() const = 0;
  virtual std::unique_ptr<TrackerBackend> open() const = 0;
};

// Streaming tracking over a bounded frame window. Single caller: steps must
// be serialised by the owner.
class TrackerSession {
 public:
  // Errors: kInvalidArgument for empty queries or out-of-frame points.
  TrackerSession(std::shared_ptr<const TrackerAdapter> adapter, const Frame& first_frame,
                 std::vector<QueryPointSet> queries, int window_size = kDefaultWindowSize);

  // Errors: kOrdering when frame.index() does not increase; kTrackerBackend
  // (message carries the adapter name) when the backend fails.
  std::vector<TrackedPointSet> step(const Frame& frame);

  // Same result as calling step() on each frame in turn.
  std::vector<std::vector<TrackedPointSet>> step_many(std::span<const Frame> frames);

  // New instances tracked from `at` (the latest frame) onward. Errors:
  // kCapability when the adapter cannot take mid-stream queries.
  std::vector<TrackedPointSet> add_queries(std::vector<QueryPointSet> queries, const Frame& at);

  // Drops an instance; used before re-seeding it with fresh queries.
  void remove_instance(InstanceId id);

  const std::deque<Frame>& frame_buffer() const { return buffer_; }
  std::size_t window_size() const { return window_size_; }
  const std::vector<QueryPointSet>& query_sets() const { return queries_; }
  const std::vector<TrackedPointSet>& latest() const { return latest_; }
  std::int64_t last_frame_index() const { return buffer_.back().index(); }
  const TrackerAdapter& adapter() const { return *adapter_; }

 private:
  void validate_queries(std::span<const QueryPointSet> queries, const Frame& frame) const;
  std::vector<TrackedPointSet> checked(std::vector<TrackedPointSet> result,
                                       std::int64_t frame_index) const;

  std::shared_ptr<const TrackerAdapter> adapter_;
  std::unique_ptr<TrackerBackend> backend_;
  std::size_t window_size_;
  std::deque<Frame> buffer_;
  std::vector<QueryPointSet> queries_;
  std::vector<TrackedPointSet> latest_;
};

// Analytic motion source for the oracle tracker.
class MotionField {
 public:
  virtual ~MotionField() = default;
  virtual Point position(const Point& query, std::int64_t birth, std::int64_t t) const = 0;
  virtual bool visible(const Point& query, std::int64_t birth, std::int64_t t) const = 0;
};

// Replays a synthetic generator's exact motion; ignores pixels.
class OracleTracker : public TrackerAdapter {
 public:
  explicit OracleTracker(std::shared_ptr<const MotionField> field) : field_(std::move(field)) {}
  std::string name() const override { return "oracle"; }
  TrackerCapabilities capabilities() const override { return {true, true}; }
  std::unique_ptr<TrackerBackend> open() const override;

 private:
  std::shared_ptr<const MotionField> field_;
};

struct NccTrackerOptions {
  int patch_radius = 10;
  int search_radius = 16;
  double min_correlation = 0.5;
};

// Frame-to-frame normalised cross-correlation template search per point.
// Only the newest two frames of the window are used; the template comes
// from the last frame where the point was visible and is refreshed on every
// visible step. Occluded points coast at their last velocity.
class NccBlockTracker : public TrackerAdapter {
 public:
  explicit NccBlockTracker(NccTrackerOptions options = {}) : options_(options) {}
  std::string name() const override { return "ncc_block"; }
  TrackerCapabilities capabilities() const override { return {true, true}; }
  std::unique_ptr<TrackerBackend> open() const override;
  const NccTrackerOptions& options() const { return options_; }

 private:
  NccTrackerOptions options_;
};

}  // namespace tapseg::trackers
