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

#include "json.hpp"
#include "tapseg/core/types.hpp"

namespace tapseg::io {

// {"index", "timestamp_ms", "height", "width", "rgb_base64"}; decoding also
// accepts {"path": <png>} for frames shared through the filesystem.
nlohmann::json frame_to_json(const Frame& frame);
Frame frame_from_json(const nlohmann::json& j);

nlohmann::json points_to_json(const std::vector<Point>& points);
std::vector<Point> points_from_json(const nlohmann::json& j);

}  // namespace tapseg::io
