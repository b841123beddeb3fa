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

#include <vector>

#include "tapseg/core/types.hpp"

namespace tapseg {

// Single-channel float image, row-major.
struct GrayImage {
  int height = 0;
  int width = 0;
  std::vector<float> data;

  float at(int row, int col) const { return data[static_cast<std::size_t>(row) * width + col]; }
};

// ITU-R BT.601 luma.
GrayImage to_gray(const Frame& frame);

// Bilinear resample with pixel-center alignment.
Frame resize_frame(const Frame& frame, Size dst);

// Nearest-neighbour resample (pixel-center alignment); keeps masks binary.
BinaryMask resize_mask_nearest(const BinaryMask& mask, Size dst);

// Connected components (4-connectivity) of the set pixels; labels are
// 1-based in raster order of each component's first pixel, 0 = background.
struct Components {
  std::vector<int> labels;
  std::vector<std::size_t> areas;  // areas[label - 1]
  int count() const { return static_cast<int>(areas.size()); }
};
Components connected_components(const BinaryMask& mask);

BinaryMask component_mask(const Components& comps, int label, Size size);

}  // namespace tapseg
