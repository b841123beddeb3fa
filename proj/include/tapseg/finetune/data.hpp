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

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "tapseg/core/types.hpp"

namespace tapseg::finetune {

enum class LabelKind { kInstance, kBinary };

std::string_view to_string(LabelKind kind);
LabelKind label_kind_from_string(std::string_view name);

// Interleaved H x W x 3 float image.
struct TensorImage {
  int height = 0;
  int width = 0;
  std::vector<float> data;

  float at(int row, int col, int ch) const {
    return data[(static_cast<std::size_t>(row) * width + col) * 3 + ch];
  }
  Size size() const { return {height, width}; }
};

// Per-channel statistics of min-max normalized images, applied as
// (v - mean) / stddev.
struct ChannelStats {
  std::array<double, 3> mean{0.0, 0.0, 0.0};
  std::array<double, 3> stddev{1.0, 1.0, 1.0};
};

nlohmann::json to_json(const ChannelStats& s);
ChannelStats channel_stats_from_json(const nlohmann::json& j);

// Per-channel min-max to [0, 1]. A channel with max == min maps to 0.
TensorImage min_max_normalize(const Frame& frame);

void standardize(TensorImage& image, const ChannelStats& stats);

// Mean and population standard deviation of the min-max normalized frames
// after resizing to `hw`. A zero deviation is stored as 1.
ChannelStats compute_channel_stats(std::span<const Frame> frames, Size hw);

struct TrainSample {
  TensorImage image;
  BinaryMask gt_mask;
  std::vector<Point> prompt_points;
  InstanceId instance_id = 0;  // 0 for binary labels
};

struct SampleParams {
  Size input_hw{1024, 1024};
  int points_per_prompt = 5;
  ChannelStats stats;
};

struct SkippedRegion {
  InstanceId instance_id = 0;
  std::string reason;
};

struct SampleSet {
  std::vector<TrainSample> samples;
  std::vector<SkippedRegion> skipped;
};

// Resizes image and labels to `input_hw` and draws the prompt points
// uniformly (seeded) from the resized region, with replacement only when it
// has fewer pixels than points. Instance labels give one sample per
// instance; binary labels give one sample for the union. Empty regions are
// skipped and reported. Throws kInvalidArgument when there is no label at
// all or the label size differs from the image.
SampleSet make_samples(const Frame& image, const InstanceMaskSet& masks, LabelKind kind,
                       std::uint64_t seed, const SampleParams& params);
SampleSet make_samples(const Frame& image, const BinaryMask& mask, std::uint64_t seed,
                       const SampleParams& params);

// Redraws the prompt points of an existing sample.
void resample_prompts(TrainSample& sample, int count, std::uint64_t seed);

// Mirrors image, mask and prompts. Left-right maps x to W - x, up-down maps
// y to H - y.
TrainSample flip(const TrainSample& sample, bool left_right, bool up_down);

// Each flip independently with probability 0.5.
TrainSample augment(const TrainSample& sample, std::uint64_t seed);

// One line of a JSON-lines dataset manifest. Relative paths resolve against
// the manifest's directory. `split` is "train" unless stated otherwise.
struct ManifestEntry {
  std::filesystem::path image_path;
  std::filesystem::path mask_path;
  LabelKind label_kind = LabelKind::kInstance;
  std::string split = "train";
};

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, std::span<const ManifestEntry> entries);

// Sibling file holding the standardization statistics: data.jsonl ->
// data.stats.json.
std::filesystem::path stats_path_for(const std::filesystem::path& manifest);

struct Dataset {
  std::vector<TrainSample> train;
  std::vector<TrainSample> val;
  std::vector<SkippedRegion> skipped;
  ChannelStats stats;
};

// Loads every entry, reusing stored statistics when present and otherwise
// computing them on the train split and writing them next to the manifest.
Dataset load_dataset(const std::filesystem::path& manifest, std::uint64_t seed,
                     Size input_hw, int points_per_prompt);

}  // namespace tapseg::finetune
