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
#include <span>
#include <vector>

#include "json.hpp"

#include "tapseg/core/types.hpp"

namespace tapseg {

// Row-major run lengths, alternating zero-run / one-run, always starting
// with a (possibly empty) zero run.
using RleCounts = std::vector<std::uint32_t>;

RleCounts mask_to_rle(const BinaryMask& mask);

// Throws kDecode when the counts do not sum to height * width.
BinaryMask rle_to_mask(std::span<const std::uint32_t> counts, int height, int width);

// {"counts": [...], "height": H, "width": W}
nlohmann::json rle_to_json(const BinaryMask& mask);
BinaryMask rle_from_json(const nlohmann::json& j);

}  // namespace tapseg
