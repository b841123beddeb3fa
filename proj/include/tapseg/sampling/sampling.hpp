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
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "tapseg/core/types.hpp"

namespace tapseg::sampling {

enum class StrategyKind { kRandom, kGrid, kShiTomasi, kKMedoids, kManual, kExternal };

std::string_view to_string(StrategyKind kind);
StrategyKind strategy_from_string(std::string_view name);

// Hook for keypoint detectors that live outside this library (e.g. SIFT).
using ExternalSampler =
    std::function<std::vector<Point>(const Frame&, const BinaryMask&, int k)>;

constexpr int kMinPointsPerInstance = 1;
constexpr int kMaxPointsPerInstance = 9;
constexpr std::size_t kMaxKMedoidsPopulation = 2048;

struct SamplingStrategy {
  StrategyKind kind = StrategyKind::kKMedoids;
  int points_per_instance = 5;
  std::uint64_t seed = 0;
  // kManual: user clicks per instance, frame coordinates.
  std::map<InstanceId, std::vector<Point>> manual_points;
  ExternalSampler external;

  void validate() const;
};

// {"strategy": "kmedoids", "points_per_instance": 5, "seed": 0}
nlohmann::json to_json(const SamplingStrategy& s);
SamplingStrategy strategy_from_json(const nlohmann::json& j);

struct KMedoidsResult {
  std::vector<std::size_t> indices;  // ascending input indices
  double cost = 0.0;                 // sum of distances to nearest medoid
  int swaps = 0;
};

// PAM: greedy BUILD then SWAP to a local optimum of the total Euclidean
// distance. Ties go to the lowest input index, and an equal-cost swap is
// taken only when it lowers a medoid index, so among equal-cost medoid sets
// reachable by SWAP the lexicographically smallest wins.
KMedoidsResult kmedoids_pam(std::span<const Point> points, int k);

// Thins populations above kMaxKMedoidsPopulation with a seeded uniform
// subsample before running PAM.
std::vector<Point> kmedoids(std::span<const Point> points, int k, std::uint64_t seed);

// Total distance from each point to its nearest medoid.
double clustering_cost(std::span<const Point> points, std::span<const std::size_t> medoids);

// Set-pixel centers in row-major order.
std::vector<Point> mask_pixel_centers(const BinaryMask& mask);

std::vector<Point> sample_random(const BinaryMask& mask, int k, std::uint64_t seed);
std::vector<Point> sample_grid(const BinaryMask& mask, int k);

struct ShiTomasiParams {
  double quality_level = 0.01;
  double min_distance = 5.0;
};
std::vector<Point> shi_tomasi_corners(const Frame& frame, const BinaryMask& mask, int k,
                                      std::uint64_t seed = 0, ShiTomasiParams params = {});

std::vector<QueryPointSet> sample_query_points(const Frame& frame, const InstanceMaskSet& masks,
                                               const SamplingStrategy& strategy);

// Sampling for a single instance mask; used by re-initialisation.
std::vector<Point> sample_instance(const Frame& frame, const BinaryMask& mask, InstanceId id,
                                   const SamplingStrategy& strategy);

// Per-instance seed derivation so instances draw independent streams.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace tapseg::sampling
