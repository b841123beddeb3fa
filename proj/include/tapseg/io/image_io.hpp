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

#include <filesystem>
#include <map>
#include <vector>

#include "tapseg/core/types.hpp"

namespace tapseg::io {

Frame read_frame_png(const std::filesystem::path& path, std::int64_t index, double timestamp_ms);
void write_frame_png(const std::filesystem::path& path, const Frame& frame);

// Decodes a PNG into a frame-sized RGB buffer from memory (uploaded chunks).
Frame decode_frame_png(std::span<const std::uint8_t> bytes, std::int64_t index, double timestamp_ms);
std::vector<std::uint8_t> encode_frame_png(const Frame& frame);

// Any non-zero pixel is foreground.
BinaryMask read_binary_mask_png(const std::filesystem::path& path);
void write_binary_mask_png(const std::filesystem::path& path, const BinaryMask& mask);

// Paletted (color-type 3) PNG: palette index 0 is background, index i > 0
// is instance i. Non-paletted inputs fall back to one instance per distinct
// non-black color, numbered 1.. in raster order of first appearance.
InstanceMaskSet read_palette_mask_png(const std::filesystem::path& path, std::int64_t frame_index);
void write_palette_mask_png(const std::filesystem::path& path, const InstanceMaskSet& masks);

// Frame with masks and points blended on top, for visual inspection.
Frame overlay(const Frame& frame, const InstanceMaskSet& masks,
              const std::vector<TrackedPointSet>& tracked);

}  // namespace tapseg::io
