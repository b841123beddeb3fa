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

#include <string>

#include "tapseg/io/line_channel.hpp"
#include "tapseg/trackers/tracker.hpp"

namespace tapseg::trackers {

// Tracker living in another process, reached over newline-delimited JSON.
// Each open() dials a fresh connection, so sessions never share remote
// state. The wire format carries flat point lists; instance grouping and
// removal are kept on this side.
//
//   -> {"op": "init"|"step"|"add", "frame": {...}, "points": [[x, y], ...]}
//   <- {"points": [[x, y], ...], "visible": [bool, ...]}  or  {"error": "..."}
class SocketTracker : public TrackerAdapter {
 public:
  SocketTracker(std::string endpoint, std::string name = "socket",
                TrackerCapabilities caps = {true, true})
      : endpoint_(std::move(endpoint)), name_(std::move(name)), caps_(caps) {}

  std::string name() const override { return name_; }
  TrackerCapabilities capabilities() const override { return caps_; }
  std::unique_ptr<TrackerBackend> open() const override;
  const std::string& endpoint() const { return endpoint_; }

 private:
  std::string endpoint_;
  std::string name_;
  TrackerCapabilities caps_;
};

// Answers protocol requests on `channel` with a local adapter until the
// peer hangs up. Backend failures are reported to the peer, not thrown.
void serve_tracker(const TrackerAdapter& adapter, io::LineChannel& channel,
                   int window_size = kDefaultWindowSize);

}  // namespace tapseg::trackers
