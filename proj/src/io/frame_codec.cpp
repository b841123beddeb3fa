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

#include "tapseg/io/frame_codec.hpp"

#include "tapseg/core/error.hpp"
#include "tapseg/io/base64.hpp"
#include "tapseg/io/image_io.hpp"

namespace tapseg::io {

nlohmann::json frame_to_json(const Frame& frame) {
  return {{"index", frame.index()},
          {"timestamp_ms", frame.timestamp_ms()},
          {"height", frame.height()},
          {"width", frame.width()},
          {"rgb_base64", base64_encode(frame.rgb())}};
}

Frame frame_from_json(const nlohmann::json& j) {
  try {
    const auto index = j.at("index").get<std::int64_t>();
    const double ts = j.value("timestamp_ms", 0.0);
    if (j.contains("path")) {
      Frame f = read_frame_png(j.at("path").get<std::string>(), index, ts);
      if (j.contains("height")) {
        require(f.height() == j.at("height").get<int>() && f.width() == j.at("width").get<int>(),
                ErrorCode::kDecode, "frame: shared file dimensions disagree with message");
      }
      return f;
    }
    return Frame(index, ts, j.at("height").get<int>(), j.at("width").get<int>(),
                 base64_decode(j.at("rgb_base64").get<std::string>()));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kDecode, std::string("frame: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kInvalidArgument) fail(ErrorCode::kDecode, e.what());
    throw;
  }
}

nlohmann::json points_to_json(const std::vector<Point>& points) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& p : points) out.push_back({p.x, p.y});
  return out;
}

std::vector<Point> points_from_json(const nlohmann::json& j) {
  std::vector<Point> out;
  try {
    for (const auto& p : j) out.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kDecode, std::string("points: ") + e.what());
  }
  return out;
}

}  // namespace tapseg::io
