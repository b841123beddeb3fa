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

#include "tapseg/core/rle.hpp"

#include <numeric>
#include <string>

#include "tapseg/core/error.hpp"

namespace tapseg {

RleCounts mask_to_rle(const BinaryMask& mask) {
  RleCounts counts;
  std::uint8_t current = 0;
  std::uint32_t run = 0;
  for (std::uint8_t bit : mask.bits()) {
    if (bit != current) {
      counts.push_back(run);
      current = bit;
      run = 0;
    }
    ++run;
  }
  counts.push_back(run);
  return counts;
}

BinaryMask rle_to_mask(std::span<const std::uint32_t> counts, int height, int width) {
  require(height >= 1 && width >= 1, ErrorCode::kDecode, "rle: non-positive dimensions");
  const std::uint64_t expected = static_cast<std::uint64_t>(height) * width;
  const std::uint64_t total =
      std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
  if (total != expected) {
    fail(ErrorCode::kDecode, "rle: counts sum to " + std::to_string(total) + ", expected " +
                                 std::to_string(expected));
  }
  std::vector<std::uint8_t> bits;
  bits.reserve(expected);
  std::uint8_t value = 0;
  for (std::uint32_t run : counts) {
    bits.insert(bits.end(), run, value);
    value ^= 1;
  }
  return BinaryMask(height, width, std::move(bits));
}

nlohmann::json rle_to_json(const BinaryMask& mask) {
  return {{"counts", mask_to_rle(mask)}, {"height", mask.height()}, {"width", mask.width()}};
}

BinaryMask rle_from_json(const nlohmann::json& j) {
  try {
    const auto& counts_json = j.contains("counts") ? j.at("counts") : j.at("rle");
    std::vector<std::uint32_t> counts;
    counts.reserve(counts_json.size());
    for (const auto& c : counts_json) {
      const auto v = c.get<std::int64_t>();
      require(v >= 0, ErrorCode::kDecode, "rle: negative run length");
      counts.push_back(static_cast<std::uint32_t>(v));
    }
    return rle_to_mask(counts, j.at("height").get<int>(), j.at("width").get<int>());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kDecode, std::string("rle: malformed json: ") + e.what());
  }
}

}  // namespace tapseg
