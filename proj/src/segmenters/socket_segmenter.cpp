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

#include "tapseg/segmenters/socket_segmenter.hpp"

#include "tapseg/core/error.hpp"
#include "tapseg/core/rle.hpp"
#include "tapseg/io/frame_codec.hpp"

namespace tapseg::segmenters {

nlohmann::json prompt_to_json(const PromptBundle& b) {
  nlohmann::json j = {{"instance_id", b.instance_id},
                      {"points", io::points_to_json(b.positive_points)},
                      {"box", nullptr},
                      {"text", nullptr}};
  if (b.box) j["box"] = {b.box->x_min, b.box->y_min, b.box->x_max, b.box->y_max};
  if (b.text) j["text"] = *b.text;
  return j;
}

PromptBundle prompt_from_json(const nlohmann::json& j) {
  try {
    PromptBundle b;
    b.instance_id = j.value("instance_id", InstanceId{0});
    if (j.contains("points")) b.positive_points = io::points_from_json(j["points"]);
    if (j.contains("box") && !j["box"].is_null()) {
      const auto v = j["box"].get<std::vector<double>>();
      require(v.size() == 4, ErrorCode::kInvalidArgument, "box needs four numbers");
      b.box = BoxPrompt{v[0], v[1], v[2], v[3]};
    }
    if (j.contains("text") && !j["text"].is_null()) b.text = j["text"].get<std::string>();
    return b;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInvalidArgument, std::string("malformed prompt: ") + e.what());
  }
}

std::vector<GrayImage> SocketSegmenter::predict(const Frame& input,
                                                std::span<const PromptBundle> prompts) const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& b : prompts) list.push_back(prompt_to_json(b));
  const nlohmann::json msg = {{"op", "segment"}, {"frame", io::frame_to_json(input)}, {"prompts", list}};

  std::lock_guard lock(mutex_);
  nlohmann::json reply;
  try {
    if (!channel_.valid()) channel_ = io::LineChannel::connect(endpoint_);
    reply = channel_.request(msg);
  } catch (const Error&) {
    channel_.close();
    throw;
  }
  if (reply.contains("error")) {
    fail(ErrorCode::kSegmenterBackend, "segmenter '" + name_ + "': " +
                                           (reply["error"].is_string()
                                                ? reply["error"].get<std::string>()
                                                : reply["error"].dump()));
  }
  try {
    const auto& masks = reply.at("masks");
    require(masks.size() == prompts.size(), ErrorCode::kSegmenterBackend,
            "remote returned " + std::to_string(masks.size()) + " masks");
    std::vector<GrayImage> out;
    for (std::size_t i = 0; i < prompts.size(); ++i) {
      const auto& m = masks[i];
      require(m.value("instance_id", prompts[i].instance_id) == prompts[i].instance_id,
              ErrorCode::kSegmenterBackend, "remote reordered instances");
      const BinaryMask mask = rle_from_json(m);
      GrayImage g{mask.height(), mask.width(), std::vector<float>(mask.bits().size())};
      for (std::size_t k = 0; k < g.data.size(); ++k) g.data[k] = mask.bits()[k] ? 1.0f : 0.0f;
      out.push_back(std::move(g));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kSegmenterBackend, std::string("malformed reply: ") + e.what());
  }
}

void serve_segmenter(const SegmenterAdapter& adapter, io::LineChannel& channel) {
  while (auto msg = channel.receive()) {
    nlohmann::json reply;
    try {
      require(msg->value("op", std::string()) == "segment", ErrorCode::kInvalidArgument,
              "unknown op");
      const Frame frame = io::frame_from_json(msg->at("frame"));
      std::vector<PromptBundle> prompts;
      for (const auto& p : msg->at("prompts")) prompts.push_back(prompt_from_json(p));
      const InstanceMaskSet set = segment(adapter, frame, prompts);
      nlohmann::json masks = nlohmann::json::array();
      for (const auto& b : prompts) {
        const BinaryMask& m = set.at(b.instance_id);
        masks.push_back({{"instance_id", b.instance_id},
                         {"rle", mask_to_rle(m)},
                         {"height", m.height()},
                         {"width", m.width()}});
      }
      reply = {{"masks", masks}};
    } catch (const std::exception& e) {
      reply = {{"error", e.what()}};
    }
    channel.send(reply);
  }
}

}  // namespace tapseg::segmenters
