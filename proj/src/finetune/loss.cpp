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

#include "tapseg/finetune/loss.hpp"

#include <algorithm>
#include <string>

#include "tapseg/core/error.hpp"
#include "tapseg/kernels/kernels.hpp"

namespace tapseg::finetune {

namespace {

void check_shapes(const RealMap& prob, const BinaryMask& gt, double epsilon) {
  require(prob.size() == gt.size() &&
              prob.data.size() == static_cast<std::size_t>(prob.height) * prob.width,
          ErrorCode::kInvalidArgument,
          "loss: prediction " + std::to_string(prob.height) + "x" + std::to_string(prob.width) +
              " does not match target " + std::to_string(gt.height()) + "x" +
              std::to_string(gt.width()));
  require(!prob.data.empty(), ErrorCode::kInvalidArgument, "loss: empty prediction");
  require(epsilon > 0.0, ErrorCode::kInvalidArgument, "loss: epsilon must be positive");
}

}  // namespace

LossReport loss(const RealMap& prob, const BinaryMask& gt, double epsilon) {
  check_shapes(prob, gt, epsilon);
  const kernels::LossSums s = kernels::loss_sums(prob.data, gt.bits(), kProbClamp);
  LossReport r;
  r.bce = s.bce / static_cast<double>(prob.data.size());
  r.dice = 1.0 - (2.0 * s.inter + epsilon) / (s.pred + s.target + epsilon);
  r.total = r.bce + r.dice;
  return r;
}

RealMap loss_gradient(const RealMap& prob, const BinaryMask& gt, double epsilon) {
  check_shapes(prob, gt, epsilon);
  const kernels::LossSums s = kernels::loss_sums(prob.data, gt.bits(), kProbClamp);
  const double n = static_cast<double>(prob.data.size());
  const double num = 2.0 * s.inter + epsilon;
  const double den = s.pred + s.target + epsilon;
  RealMap g{prob.height, prob.width, std::vector<double>(prob.data.size())};
  const auto bits = gt.bits();
  for (std::size_t i = 0; i < prob.data.size(); ++i) {
    const double p = prob.data[i];
    const double t = bits[i] ? 1.0 : 0.0;
    double d_bce = 0.0;
    if (p > kProbClamp && p < 1.0 - kProbClamp) d_bce = (-t / p + (1.0 - t) / (1.0 - p)) / n;
    const double d_dice = -(2.0 * t * den - num) / (den * den);
    g.data[i] = d_bce + d_dice;
  }
  return g;
}

double dice_score(const RealMap& prob, const BinaryMask& gt) {
  require(prob.size() == gt.size(), ErrorCode::kInvalidArgument, "dice_score: shape mismatch");
  std::vector<std::uint8_t> hard(prob.data.size());
  std::transform(prob.data.begin(), prob.data.end(), hard.begin(),
                 [](double p) { return p >= 0.5 ? 1 : 0; });
  const kernels::OverlapCounts c = kernels::overlap_counts(hard, gt.bits());
  const std::uint64_t sum = c.count_a + c.count_b;
  return sum == 0 ? 1.0 : 2.0 * static_cast<double>(c.intersection) / static_cast<double>(sum);
}

}  // namespace tapseg::finetune
