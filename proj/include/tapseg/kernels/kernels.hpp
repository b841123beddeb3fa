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

// Data-parallel inner loops shared by the modules. Every kernel exists twice
// with the same signature: `serial::` is the straightforward reference loop
// kept for testing, `omp::` is the OpenMP version the library calls. Results
// must agree exactly for integer outputs and to rounding for float sums.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tapseg/core/image.hpp"
#include "tapseg/core/types.hpp"

namespace tapseg::kernels {

struct OverlapCounts {
  std::uint64_t intersection = 0;
  std::uint64_t count_a = 0;
  std::uint64_t count_b = 0;
};

// Pixel sums needed by the BCE + soft-Dice objective.
struct LossSums {
  double bce = 0.0;     // sum of per-pixel cross entropy
  double inter = 0.0;   // sum p*g
  double pred = 0.0;    // sum p
  double target = 0.0;  // sum g
};

struct NccQuery {
  Point from;     // position in the previous frame (template center)
  Point predict;  // search center in the current frame
};

struct NccMatch {
  double dx = 0.0;  // displacement from `from`, subpixel
  double dy = 0.0;
  double score = -1.0;
};

struct NccParams {
  int patch_radius = 10;
  int search_radius = 16;
};

// Swap-gain table for one PAM SWAP round; entry [h * k + slot] is the change
// in total cost when medoid `slot` is replaced by point h. Rows of current
// medoids are left at +infinity.
struct PamState {
  std::span<const Point> points;
  std::span<const std::size_t> medoids;
  std::span<const std::uint8_t> is_medoid;
  std::span<const std::size_t> nearest_slot;
  std::span<const double> d1;
  std::span<const double> d2;
};

namespace serial {
OverlapCounts overlap_counts(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);
LossSums loss_sums(std::span<const double> prob, std::span<const std::uint8_t> gt,
                   double clamp_eps);
std::vector<float> min_eigen_map(const GrayImage& gray);
std::vector<NccMatch> ncc_match(const GrayImage& prev, const GrayImage& cur,
                                std::span<const NccQuery> queries, NccParams params);
std::vector<double> pam_swap_deltas(const PamState& state);
}  // namespace serial

namespace omp {
OverlapCounts overlap_counts(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);
LossSums loss_sums(std::span<const double> prob, std::span<const std::uint8_t> gt,
                   double clamp_eps);
std::vector<float> min_eigen_map(const GrayImage& gray);
std::vector<NccMatch> ncc_match(const GrayImage& prev, const GrayImage& cur,
                                std::span<const NccQuery> queries, NccParams params);
std::vector<double> pam_swap_deltas(const PamState& state);
}  // namespace omp

// Library-wide default.
using namespace omp;

// Number of threads the OpenMP kernels will use.
int max_threads();

}  // namespace tapseg::kernels
