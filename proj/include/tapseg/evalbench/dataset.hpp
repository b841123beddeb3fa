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
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "tapseg/evalbench/metrics.hpp"

namespace tapseg::evalbench {

enum class MaskEncoding { kPalette, kBinary };

std::string_view to_string(MaskEncoding e);
MaskEncoding mask_encoding_from_string(std::string_view name);

// Directory names are relative to the dataset root. Frames and masks are
// paired by the last run of digits in their file names.
struct DatasetLayout {
  std::string frames_dir = "frames";
  std::string masks_dir = "masks";
  MaskEncoding mask_encoding = MaskEncoding::kPalette;
};

struct FramePair {
  std::int64_t frame_index = 0;
  std::filesystem::path frame;
  std::filesystem::path mask;
};

struct DatasetHandle {
  std::filesystem::path root;
  DatasetLayout layout;
  std::vector<FramePair> pairs;  // ascending frame index

  // Decodes the mask of pairs[i]: one instance per palette index or one
  // instance (id 1) for binary masks.
  InstanceMaskSet load_mask(std::size_t i) const;
  GroundTruth load_ground_truth() const;
};

// Throws kIo when a directory is missing and kManifest listing every frame
// without a mask and every mask without a frame.
DatasetHandle ingest_dataset(const std::filesystem::path& root, const DatasetLayout& layout);

nlohmann::json to_json(const DatasetHandle& d);

}  // namespace tapseg::evalbench
