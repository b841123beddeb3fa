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

#include "tapseg/pipeline/config.hpp"

#include "tapseg/core/error.hpp"
#include "tapseg/io/frame_codec.hpp"

namespace tapseg::pipeline {

std::string to_string(InitMode mode) {
  switch (mode) {
    case InitMode::kText: return "text";
    case InitMode::kBox: return "box";
    case InitMode::kPoints: return "points";
    case InitMode::kMaskFile: return "mask_file";
  }
  return "?";
}

InitMode init_mode_from_string(std::string_view name) {
  if (name == "text") return InitMode::kText;
  if (name == "box") return InitMode::kBox;
  if (name == "points") return InitMode::kPoints;
  if (name == "mask_file") return InitMode::kMaskFile;
  fail(ErrorCode::kConfiguration, "pipeline.init_mode: unknown mode '" + std::string(name) + "'");
}

void PipelineConfig::validate() const {
  try {
    strategy.validate();
  } catch (const Error& e) {
    fail(ErrorCode::kConfiguration, std::string("sampling: ") + e.what());
  }
  require(!tracker.name.empty(), ErrorCode::kConfiguration, "tracker.name is empty");
  require(!segmenter.name.empty(), ErrorCode::kConfiguration, "segmenter.name is empty");
  require(min_visible_points >= 1, ErrorCode::kConfiguration,
          "pipeline.min_visible_points must be >= 1");
  require(reinit_patience_frames >= 1, ErrorCode::kConfiguration,
          "pipeline.reinit_patience_frames must be >= 1");
  require(window_size >= 1, ErrorCode::kConfiguration, "pipeline.window_size must be >= 1");
  if (init.mode == InitMode::kMaskFile) {
    require(!init.mask_file.empty(), ErrorCode::kConfiguration,
            "pipeline.mask_file is required for init_mode mask_file");
  }
  if (init.mode == InitMode::kText) {
    require(!init.text.empty(), ErrorCode::kConfiguration, "pipeline.text is empty");
  }
}

nlohmann::json to_json(const PipelineConfig& c) {
  nlohmann::json boxes = nlohmann::json::array();
  for (const auto& b : c.init.boxes) boxes.push_back({b.x_min, b.y_min, b.x_max, b.y_max});
  nlohmann::json points = nlohmann::json::object();
  for (const auto& [id, pts] : c.init.points) points[std::to_string(id)] = io::points_to_json(pts);
  return {
      {"sampling", sampling::to_json(c.strategy)},
      {"tracker", {{"name", c.tracker.name}, {"options", c.tracker.options}}},
      {"segmenter", {{"name", c.segmenter.name}, {"options", c.segmenter.options}}},
      {"pipeline",
       {{"init_mode", to_string(c.init.mode)},
        {"text", c.init.text},
        {"boxes", boxes},
        {"points", points},
        {"mask_file", c.init.mask_file},
        {"min_visible_points", c.min_visible_points},
        {"reinit_patience_frames", c.reinit_patience_frames},
        {"window_size", c.window_size}}},
  };
}

namespace {

AdapterSpec adapter_from_json(const nlohmann::json& j, const std::string& fallback) {
  AdapterSpec spec{fallback, nlohmann::json::object()};
  if (j.is_string()) {
    spec.name = j.get<std::string>();
  } else if (j.is_object()) {
    spec.name = j.value("name", fallback);
    spec.options = j.value("options", nlohmann::json::object());
  }
  return spec;
}

}  // namespace

PipelineConfig config_from_json(const nlohmann::json& j) {
  PipelineConfig c;
  std::string section = "config";
  try {
    require(j.is_object(), ErrorCode::kConfiguration, "config must be a JSON object");
    if (j.contains("sampling")) {
      section = "sampling";
      c.strategy = sampling::strategy_from_json(j["sampling"]);
    }
    section = "tracker";
    if (j.contains("tracker")) c.tracker = adapter_from_json(j["tracker"], c.tracker.name);
    section = "segmenter";
    if (j.contains("segmenter")) c.segmenter = adapter_from_json(j["segmenter"], c.segmenter.name);
    if (j.contains("pipeline")) {
      const auto& p = j["pipeline"];
      section = "pipeline.init_mode";
      if (p.contains("init_mode")) c.init.mode = init_mode_from_string(p["init_mode"].get<std::string>());
      section = "pipeline.text";
      c.init.text = p.value("text", c.init.text);
      section = "pipeline.boxes";
      for (const auto& b : p.value("boxes", nlohmann::json::array())) {
        const auto v = b.get<std::vector<double>>();
        require(v.size() == 4, ErrorCode::kConfiguration, "pipeline.boxes: need [x0, y0, x1, y1]");
        c.init.boxes.push_back({v[0], v[1], v[2], v[3]});
      }
      section = "pipeline.points";
      const nlohmann::json clicks = p.value("points", nlohmann::json::object());
      for (const auto& [key, pts] : clicks.items()) {
        c.init.points[std::stoll(key)] = io::points_from_json(pts);
      }
      section = "pipeline.mask_file";
      c.init.mask_file = p.value("mask_file", c.init.mask_file);
      section = "pipeline.min_visible_points";
      c.min_visible_points = p.value("min_visible_points", c.min_visible_points);
      section = "pipeline.reinit_patience_frames";
      c.reinit_patience_frames = p.value("reinit_patience_frames", c.reinit_patience_frames);
      section = "pipeline.window_size";
      c.window_size = p.value("window_size", c.window_size);
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfiguration) throw;
    fail(ErrorCode::kConfiguration, section + ": " + e.what());
  } catch (const std::exception& e) {
    fail(ErrorCode::kConfiguration, section + ": " + e.what());
  }
  c.validate();
  return c;
}

}  // namespace tapseg::pipeline
