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
#include <vector>

#include "tapseg/finetune/train.hpp"

namespace tapseg::finetune {

// Small differentiable stand-in for a promptable segmenter, with the same
// three parameter groups:
//   image_encoder   f = w . rgb + b            (per pixel)
//   prompt_encoder  q = a * exp(-d^2 / s^2) + c  (d = distance to the
//                   nearest prompt, s a fixed fraction of the image side)
//   mask_decoder    p = sigmoid(u0 f + u1 q + u2 f q + u3)
class ToyPromptSegmenter : public TrainingAdapter {
 public:
  explicit ToyPromptSegmenter(std::uint64_t seed = 0);

  std::string name() const override { return "toy"; }
  std::vector<Parameter>& parameters() override { return params_; }
  RealMap forward(const TensorImage& image, std::span<const Point> points) const override;
  std::vector<std::vector<double>> backward(const TensorImage& image, std::span<const Point> points,
                                            const RealMap& grad_prob) const override;
  void save(std::ostream& out) const override;
  void load(std::istream& in) override;

 private:
  std::vector<Parameter> params_;
};

struct ToyExample {
  Frame image;
  InstanceMaskSet masks;
};

// Frames with one or two bright disks on a noisy dark background, labelled
// per instance.
std::vector<ToyExample> toy_examples(int count, Size hw, std::uint64_t seed);

// toy_examples run through make_samples with statistics computed on them.
Dataset toy_dataset(int train_count, int val_count, Size hw, int points_per_prompt,
                    std::uint64_t seed);

}  // namespace tapseg::finetune
