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

namespace tapseg::finetune {

// Row-major real-valued H x W map.
struct RealMap {
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Size size() const { return {height, width}; }
};

struct LossReport {
  double bce = 0.0;
  double dice = 0.0;
  double total = 0.0;
};

constexpr double kDiceEpsilon = 1.0;
constexpr double kProbClamp = 1e-7;

// Pixel-mean binary cross entropy plus soft Dice loss
// 1 - (2 sum(p g) + eps) / (sum p + sum g + eps). Probabilities are clamped
// to [1e-7, 1 - 1e-7] inside the logarithms only.
LossReport loss(const RealMap& prob, const BinaryMask& gt, double epsilon = kDiceEpsilon);

// d(total)/dp per pixel. Where the clamp is active the cross-entropy term
// contributes nothing.
RealMap loss_gradient(const RealMap& prob, const BinaryMask& gt, double epsilon = kDiceEpsilon);

// Hard Dice of prob >= 0.5 against gt; 1 when both are empty.
double dice_score(const RealMap& prob, const BinaryMask& gt);

}  // namespace tapseg::finetune
