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

#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "tapseg/core/types.hpp"
#include "tapseg/sampling/sampling.hpp"
#include "tapseg/trackers/tracker.hpp"

namespace tapseg::pipeline {

enum class InitMode { kText, kBox, kPoints, kMaskFile };

std::string to_string(InitMode mode);
InitMode init_mode_from_string(std::string_view name);

// Adapter name plus adapter-specific options.
struct AdapterSpec {
  std::string name;
  nlohmann::json options = nlohmann::json::object();
};

// What the first frame is initialised from; only the field matching the
// mode is consulted.
struct InitSpec {
  InitMode mode = InitMode::kPoints;
  std::string text = "surgical tool";
  std::vector<BoxPrompt> boxes;
  std::map<InstanceId, std::vector<Point>> points;
  std::string mask_file;
};

struct PipelineConfig {
  sampling::SamplingStrategy strategy;
  AdapterSpec tracker{"ncc_block"};
  AdapterSpec segmenter{"threshold_flood"};
  InitSpec init;
  int min_visible_points = 2;
  int reinit_patience_frames = 3;
  int window_size = trackers::kDefaultWindowSize;

  // Errors: kConfiguration naming the offending field.
  void validate() const;
};

// Sections "sampling", "tracker", "segmenter", "pipeline"; other sections
// are ignored so one document can carry a whole experiment.
nlohmann::json to_json(const PipelineConfig& config);
PipelineConfig config_from_json(const nlohmann::json& j);

}  // namespace tapseg::pipeline
