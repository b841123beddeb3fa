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

#include "tapseg/trackers/socket_tracker.hpp"

#include <deque>

#include "tapseg/core/error.hpp"
#include "tapseg/io/frame_codec.hpp"

namespace tapseg::trackers {

namespace {

struct Group {
  InstanceId id;
  std::size_t offset;
  std::size_t count;
};

class SocketBackend : public TrackerBackend {
 public:
  explicit SocketBackend(io::LineChannel channel) : channel_(std::move(channel)) {}

  std::vector<TrackedPointSet> init(const Frame& first,
                                    std::span<const QueryPointSet> queries) override {
    groups_.clear();
    total_ = 0;
    return exchange("init", first, queries);
  }

  std::vector<TrackedPointSet> step(std::span<const Frame> window) override {
    return exchange("step", window.back(), {});
  }

  std::vector<TrackedPointSet> add(std::span<const QueryPointSet> queries,
                                   const Frame& at) override {
    return exchange("add", at, queries);
  }

  void remove(InstanceId id) override {
    std::erase_if(groups_, [id](const Group& g) { return g.id == id; });
  }

 private:
  std::vector<TrackedPointSet> exchange(const char* op, const Frame& frame,
                                        std::span<const QueryPointSet> queries) {
    std::vector<Point> flat;
    for (const auto& q : queries) {
      groups_.push_back({q.instance_id, total_ + flat.size(), q.points.size()});
      flat.insert(flat.end(), q.points.begin(), q.points.end());
    }
    nlohmann::json msg = {{"op", op}, {"frame", io::frame_to_json(frame)}};
    if (!flat.empty() || std::string(op) != "step") msg["points"] = io::points_to_json(flat);
    const nlohmann::json reply = channel_.request(msg);
    total_ += flat.size();
    if (reply.contains("error")) {
      fail(ErrorCode::kTrackerBackend, reply["error"].is_string()
                                           ? reply["error"].get<std::string>()
                                           : reply["error"].dump());
    }
    try {
      const auto points = io::points_from_json(reply.at("points"));
      const auto visible = reply.at("visible").get<std::vector<bool>>();
      require(points.size() == total_ && visible.size() == total_, ErrorCode::kTrackerBackend,
              "remote returned " + std::to_string(points.size()) + " points, expected " +
                  std::to_string(total_));
      std::vector<TrackedPointSet> out;
      for (const auto& g : groups_) {
        TrackedPointSet set{g.id, frame.index(), {}, {}};
        for (std::size_t i = g.offset; i < g.offset + g.count; ++i) {
          set.points.push_back(points[i]);
          set.visible.push_back(visible[i]);
        }
        out.push_back(std::move(set));
      }
      return out;
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kTrackerBackend, std::string("malformed reply: ") + e.what());
    }
  }

  io::LineChannel channel_;
  std::vector<Group> groups_;
  std::size_t total_ = 0;
};

nlohmann::json flatten(const std::vector<TrackedPointSet>& sets) {
  std::vector<Point> points;
  std::vector<bool> visible;
  for (const auto& s : sets) {
    points.insert(points.end(), s.points.begin(), s.points.end());
    visible.insert(visible.end(), s.visible.begin(), s.visible.end());
  }
  return {{"points", io::points_to_json(points)}, {"visible", visible}};
}

}  // namespace

std::unique_ptr<TrackerBackend> SocketTracker::open() const {
  return std::make_unique<SocketBackend>(io::LineChannel::connect(endpoint_));
}

void serve_tracker(const TrackerAdapter& adapter, io::LineChannel& channel, int window_size) {
  std::unique_ptr<TrackerBackend> backend;
  std::deque<Frame> window;
  InstanceId next_id = 0;
  auto as_queries = [&](const nlohmann::json& msg, std::int64_t birth) {
    std::vector<QueryPointSet> q;
    // One pseudo-instance per request keeps the remote side grouping-agnostic.
    q.push_back({next_id++, io::points_from_json(msg.at("points")), birth});
    return q;
  };
  while (auto msg = channel.receive()) {
    nlohmann::json reply;
    try {
      const std::string op = msg->at("op").get<std::string>();
      const Frame frame = io::frame_from_json(msg->at("frame"));
      if (op == "init") {
        backend = adapter.open();
        window.assign(1, frame);
        next_id = 0;
        auto q = as_queries(*msg, frame.index());
        backend->init(frame, q);
        // Birth-frame tracks are the queries themselves.
        reply = flatten({{q[0].instance_id, frame.index(), q[0].points,
                          std::vector<bool>(q[0].points.size(), true)}});
      } else {
        require(backend != nullptr, ErrorCode::kState, "'" + op + "' before 'init'");
        if (op == "step") {
          require(frame.index() > window.back().index(), ErrorCode::kOrdering,
                  "frame index must increase");
          if (static_cast<int>(window.size()) == window_size) window.pop_front();
          window.push_back(frame);
          const std::vector<Frame> frames(window.begin(), window.end());
          reply = flatten(backend->step(frames));
        } else if (op == "add") {
          require(adapter.capabilities().supports_midstream_queries, ErrorCode::kCapability,
                  "adapter does not accept mid-stream queries");
          auto q = as_queries(*msg, frame.index());
          auto sets = backend->add(q, frame);
          // The fresh group reports its query positions at its birth frame.
          sets.back().points = q[0].points;
          sets.back().visible.assign(q[0].points.size(), true);
          reply = flatten(sets);
        } else {
          fail(ErrorCode::kInvalidArgument, "unknown op '" + op + "'");
        }
      }
    } catch (const std::exception& e) {
      reply = {{"error", e.what()}};
    }
    channel.send(reply);
  }
}

}  // namespace tapseg::trackers
