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

#include <mutex>
#include <string>

#include "tapseg/io/line_channel.hpp"
#include "tapseg/segmenters/segmenter.hpp"

namespace tapseg::segmenters {

// Segmenter in another process. Requests go over one lazily opened
// connection and are single-flight per adapter instance.
//
//   -> {"op": "segment", "frame": {...},
//       "prompts": [{"instance_id", "points", "box": [x0,y0,x1,y1]|null, "text": str|null}]}
//   <- {"masks": [{"instance_id", "rle": [...], "height", "width"}]}  or  {"error": "..."}
class SocketSegmenter : public SegmenterAdapter {
 public:
  SocketSegmenter(std::string endpoint, std::string name = "socket",
                  std::set<PromptMode> modes = {PromptMode::kPoints, PromptMode::kBox,
                                                PromptMode::kText})
      : endpoint_(std::move(endpoint)), name_(std::move(name)), modes_(std::move(modes)) {}

  std::string name() const override { return name_; }
  std::set<PromptMode> prompt_modes() const override { return modes_; }
  std::vector<GrayImage> predict(const Frame& input,
                                 std::span<const PromptBundle> prompts) const override;

 private:
  std::string endpoint_;
  std::string name_;
  std::set<PromptMode> modes_;
  mutable std::mutex mutex_;
  mutable io::LineChannel channel_;
};

nlohmann::json prompt_to_json(const PromptBundle& bundle);
PromptBundle prompt_from_json(const nlohmann::json& j);

// Serves segment requests with a local adapter until the peer hangs up.
void serve_segmenter(const SegmenterAdapter& adapter, io::LineChannel& channel);

}  // namespace tapseg::segmenters
