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

#include "tapseg/sampling/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "tapseg/core/error.hpp"
#include "tapseg/core/image.hpp"
#include "tapseg/kernels/kernels.hpp"

namespace tapseg::sampling {

namespace {

double dist(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

double tie_tolerance(double scale) { return 1e-9 * std::max(1.0, std::abs(scale)); }

struct Assignment {
  std::vector<std::size_t> nearest_slot;
  std::vector<double> d1;
  std::vector<double> d2;
  double cost = 0.0;
};

Assignment assign(std::span<const Point> points, std::span<const std::size_t> medoids) {
  const std::size_t n = points.size();
  Assignment a;
  a.nearest_slot.assign(n, 0);
  a.d1.assign(n, std::numeric_limits<double>::infinity());
  a.d2.assign(n, std::numeric_limits<double>::infinity());
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t slot = 0; slot < medoids.size(); ++slot) {
      const double d = dist(points[j], points[medoids[slot]]);
      if (d < a.d1[j]) {
        a.d2[j] = a.d1[j];
        a.d1[j] = d;
        a.nearest_slot[j] = slot;
      } else if (d < a.d2[j]) {
        a.d2[j] = d;
      }
    }
    a.cost += a.d1[j];
  }
  return a;
}

void require_non_empty(const BinaryMask& mask, std::string_view what) {
  if (mask.none()) fail(ErrorCode::kEmptyRegion, std::string(what) + ": mask has no set pixels");
}

// Repeats `pts` cyclically until it holds k entries.
std::vector<Point> cycle_fill(std::vector<Point> pts, int k) {
  const std::size_t base = pts.size();
  for (std::size_t i = 0; pts.size() < static_cast<std::size_t>(k); ++i) {
    pts.push_back(pts[i % base]);
  }
  return pts;
}

}  // namespace

std::string_view to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::kRandom: return "random";
    case StrategyKind::kGrid: return "grid";
    case StrategyKind::kShiTomasi: return "shi_tomasi";
    case StrategyKind::kKMedoids: return "kmedoids";
    case StrategyKind::kManual: return "manual";
    case StrategyKind::kExternal: return "external";
  }
  return "unknown";
}

StrategyKind strategy_from_string(std::string_view name) {
  for (auto kind : {StrategyKind::kRandom, StrategyKind::kGrid, StrategyKind::kShiTomasi,
                    StrategyKind::kKMedoids, StrategyKind::kManual, StrategyKind::kExternal}) {
    if (to_string(kind) == name) return kind;
  }
  fail(ErrorCode::kConfiguration, "unknown sampling strategy '" + std::string(name) + "'");
}

void SamplingStrategy::validate() const {
  if (points_per_instance < kMinPointsPerInstance ||
      points_per_instance > kMaxPointsPerInstance) {
    fail(ErrorCode::kConfiguration,
         "sampling.points_per_instance must be in [1, 9], got " +
             std::to_string(points_per_instance));
  }
  if (kind == StrategyKind::kExternal && !external) {
    fail(ErrorCode::kConfiguration, "sampling: external strategy has no sampler attached");
  }
}

nlohmann::json to_json(const SamplingStrategy& s) {
  return {{"strategy", std::string(to_string(s.kind))},
          {"points_per_instance", s.points_per_instance},
          {"seed", s.seed}};
}

SamplingStrategy strategy_from_json(const nlohmann::json& j) {
  SamplingStrategy s;
  try {
    if (j.contains("strategy")) s.kind = strategy_from_string(j.at("strategy").get<std::string>());
    if (j.contains("points_per_instance")) s.points_per_instance = j.at("points_per_instance").get<int>();
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfiguration, std::string("sampling: ") + e.what());
  }
  s.validate();
  return s;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  // splitmix64 finaliser
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double clustering_cost(std::span<const Point> points, std::span<const std::size_t> medoids) {
  double cost = 0.0;
  for (const auto& p : points) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t m : medoids) best = std::min(best, dist(p, points[m]));
    cost += best;
  }
  return cost;
}

KMedoidsResult kmedoids_pam(std::span<const Point> points, int k) {
  const std::size_t n = points.size();
  if (k < 1 || static_cast<std::size_t>(k) > n) {
    fail(ErrorCode::kInvalidArgument, "kmedoids: k=" + std::to_string(k) +
                                          " outside [1, " + std::to_string(n) + "]");
  }
  for (const auto& p : points) {
    require(is_finite(p), ErrorCode::kInvalidArgument, "kmedoids: non-finite point");
  }

  // BUILD
  std::vector<std::size_t> medoids;
  std::vector<std::uint8_t> is_medoid(n, 0);
  std::vector<double> d1(n, std::numeric_limits<double>::infinity());
  for (int step = 0; step < k; ++step) {
    double best_cost = std::numeric_limits<double>::infinity();
    std::size_t best = n;
    for (std::size_t c = 0; c < n; ++c) {
      if (is_medoid[c]) continue;
      double cost = 0.0;
      for (std::size_t j = 0; j < n; ++j) cost += std::min(d1[j], dist(points[j], points[c]));
      if (best == n || cost < best_cost - tie_tolerance(best_cost)) {
        best_cost = cost;
        best = c;
      }
    }
    medoids.push_back(best);
    is_medoid[best] = 1;
    for (std::size_t j = 0; j < n; ++j) d1[j] = std::min(d1[j], dist(points[j], points[best]));
  }

  // SWAP
  KMedoidsResult result;
  Assignment a = assign(points, medoids);
  const std::size_t ku = static_cast<std::size_t>(k);
  const int max_rounds = 100 * k + static_cast<int>(n);
  for (int round = 0; round < max_rounds; ++round) {
    const kernels::PamState state{points, medoids, is_medoid, a.nearest_slot, a.d1, a.d2};
    const std::vector<double> deltas = kernels::pam_swap_deltas(state);
    const double tol = tie_tolerance(a.cost);

    std::size_t best_h = n, best_slot = 0;
    double best_delta = std::numeric_limits<double>::infinity();
    for (std::size_t h = 0; h < n; ++h) {
      if (is_medoid[h]) continue;
      for (std::size_t slot = 0; slot < ku; ++slot) {
        const double d = deltas[h * ku + slot];
        if (d < best_delta - tol) {
          best_delta = d;
          best_h = h;
          best_slot = slot;
        }
      }
    }
    if (!(best_h < n && best_delta < -tol)) {
      // Equal-cost swaps are taken only toward lower indices, which
      // terminates because the index sum strictly decreases.
      best_h = n;
      for (std::size_t h = 0; h < n && best_h == n; ++h) {
        if (is_medoid[h]) continue;
        for (std::size_t slot = 0; slot < ku; ++slot) {
          if (std::abs(deltas[h * ku + slot]) <= tol && h < medoids[slot]) {
            best_h = h;
            best_slot = slot;
            break;
          }
        }
      }
      if (best_h == n) break;
    }
    is_medoid[medoids[best_slot]] = 0;
    medoids[best_slot] = best_h;
    is_medoid[best_h] = 1;
    a = assign(points, medoids);
    ++result.swaps;
  }

  std::sort(medoids.begin(), medoids.end());
  result.indices = medoids;
  result.cost = clustering_cost(points, medoids);
  return result;
}

std::vector<Point> kmedoids(std::span<const Point> points, int k, std::uint64_t seed) {
  if (k < 1 || static_cast<std::size_t>(k) > points.size()) {
    fail(ErrorCode::kInvalidArgument, "kmedoids: k=" + std::to_string(k) + " exceeds " +
                                          std::to_string(points.size()) + " points");
  }
  std::vector<Point> population(points.begin(), points.end());
  if (population.size() > kMaxKMedoidsPopulation) {
    std::vector<std::size_t> idx(population.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> keep;
    keep.reserve(kMaxKMedoidsPopulation);
    std::sample(idx.begin(), idx.end(), std::back_inserter(keep), kMaxKMedoidsPopulation, rng);
    std::vector<Point> thinned;
    thinned.reserve(keep.size());
    for (std::size_t i : keep) thinned.push_back(population[i]);
    population = std::move(thinned);
  }
  const KMedoidsResult r = kmedoids_pam(population, k);
  std::vector<Point> out;
  out.reserve(r.indices.size());
  for (std::size_t i : r.indices) out.push_back(population[i]);
  return out;
}

std::vector<Point> mask_pixel_centers(const BinaryMask& mask) {
  std::vector<Point> out;
  for (int r = 0; r < mask.height(); ++r) {
    for (int c = 0; c < mask.width(); ++c) {
      if (mask.at(r, c)) out.push_back(cell_center(r, c));
    }
  }
  return out;
}

std::vector<Point> sample_random(const BinaryMask& mask, int k, std::uint64_t seed) {
  require_non_empty(mask, "sample_random");
  require(k >= 1, ErrorCode::kInvalidArgument, "sample_random: k must be positive");
  const std::vector<Point> centers = mask_pixel_centers(mask);
  const std::size_t n = centers.size();
  std::mt19937_64 rng(seed);
  std::vector<Point> out;
  out.reserve(k);
  if (n < static_cast<std::size_t>(k)) {
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (int i = 0; i < k; ++i) out.push_back(centers[pick(rng)]);
    return out;
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
    out.push_back(centers[idx[i]]);
  }
  return out;
}

std::vector<Point> sample_grid(const BinaryMask& mask, int k) {
  require_non_empty(mask, "sample_grid");
  require(k >= 1, ErrorCode::kInvalidArgument, "sample_grid: k must be positive");
  int r0 = mask.height(), r1 = -1, c0 = mask.width(), c1 = -1;
  for (int r = 0; r < mask.height(); ++r) {
    for (int c = 0; c < mask.width(); ++c) {
      if (!mask.at(r, c)) continue;
      r0 = std::min(r0, r);
      r1 = std::max(r1, r);
      c0 = std::min(c0, c);
      c1 = std::max(c1, c);
    }
  }
  const double area = static_cast<double>(r1 - r0 + 1) * (c1 - c0 + 1);
  const Point center{(c0 + c1 + 1) / 2.0, (r0 + r1 + 1) / 2.0};
  int stride = std::max(1, static_cast<int>(std::floor(std::sqrt(area / k))));

  std::vector<Point> survivors;
  while (true) {
    survivors.clear();
    const double offset = stride / 2.0;
    for (double y = r0 + offset; y < r1 + 1; y += stride) {
      for (double x = c0 + offset; x < c1 + 1; x += stride) {
        if (mask.contains({x, y})) survivors.push_back({x, y});
      }
    }
    if (survivors.size() >= static_cast<std::size_t>(k) || stride == 1) break;
    stride = std::max(1, stride / 2);
  }
  if (survivors.size() < static_cast<std::size_t>(k)) return cycle_fill(std::move(survivors), k);

  // Keep the k lattice points closest to the bounding-box center, emitted in
  // row-major order.
  std::vector<std::size_t> order(survivors.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dist(survivors[a], center) < dist(survivors[b], center);
  });
  order.resize(k);
  std::sort(order.begin(), order.end());
  std::vector<Point> out;
  out.reserve(k);
  for (std::size_t i : order) out.push_back(survivors[i]);
  return out;
}

std::vector<Point> shi_tomasi_corners(const Frame& frame, const BinaryMask& mask, int k,
                                      std::uint64_t seed, ShiTomasiParams params) {
  require_non_empty(mask, "shi_tomasi_corners");
  require(mask.size() == frame.size(), ErrorCode::kInvalidArgument,
          "shi_tomasi_corners: mask and frame dimensions differ");
  require(k >= 1, ErrorCode::kInvalidArgument, "shi_tomasi_corners: k must be positive");
  const std::vector<float> score = kernels::min_eigen_map(to_gray(frame));
  const int w = frame.width();

  float max_score = 0.0f;
  for (std::size_t i = 0; i < score.size(); ++i) {
    if (mask.bits()[i]) max_score = std::max(max_score, score[i]);
  }
  std::vector<std::size_t> candidates;
  if (max_score > 0.0f) {
    const double floor_score = params.quality_level * max_score;
    for (std::size_t i = 0; i < score.size(); ++i) {
      if (mask.bits()[i] && score[i] > 0.0f && score[i] >= floor_score) candidates.push_back(i);
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  }

  std::vector<Point> out;
  for (std::size_t i : candidates) {
    if (out.size() == static_cast<std::size_t>(k)) break;
    const Point p = cell_center(static_cast<int>(i / w), static_cast<int>(i % w));
    const bool suppressed = std::any_of(out.begin(), out.end(), [&](const Point& q) {
      return dist(p, q) < params.min_distance;
    });
    if (!suppressed) out.push_back(p);
  }
  if (out.size() < static_cast<std::size_t>(k)) {
    const std::vector<Point> centers = mask_pixel_centers(mask);
    const int missing = k - static_cast<int>(out.size());
    std::vector<Point> pad = centers.size() >= static_cast<std::size_t>(missing)
                                 ? kmedoids(centers, missing, seed)
                                 : cycle_fill(centers, missing);
    out.insert(out.end(), pad.begin(), pad.end());
  }
  return out;
}

std::vector<Point> sample_instance(const Frame& frame, const BinaryMask& mask, InstanceId id,
                                   const SamplingStrategy& strategy) {
  if (mask.none()) {
    fail(ErrorCode::kEmptyRegion, "instance " + std::to_string(id) + " has an empty mask");
  }
  const int k = strategy.points_per_instance;
  const std::uint64_t seed = derive_seed(strategy.seed, static_cast<std::uint64_t>(id));
  switch (strategy.kind) {
    case StrategyKind::kRandom:
      return sample_random(mask, k, seed);
    case StrategyKind::kGrid:
      return sample_grid(mask, k);
    case StrategyKind::kShiTomasi:
      return shi_tomasi_corners(frame, mask, k, seed);
    case StrategyKind::kKMedoids: {
      const std::vector<Point> centers = mask_pixel_centers(mask);
      if (centers.size() < static_cast<std::size_t>(k)) return cycle_fill(centers, k);
      return kmedoids(centers, k, seed);
    }
    case StrategyKind::kExternal: {
      std::vector<Point> pts = strategy.external(frame, mask, k);
      require(!pts.empty(), ErrorCode::kEmptyRegion,
              "external sampler returned no points for instance " + std::to_string(id));
      return pts;
    }
    case StrategyKind::kManual:
      break;
  }
  // Manual strategies carry no sampler; re-sampling falls back to K-Medoids.
  SamplingStrategy fallback = strategy;
  fallback.kind = StrategyKind::kKMedoids;
  return sample_instance(frame, mask, id, fallback);
}

std::vector<QueryPointSet> sample_query_points(const Frame& frame, const InstanceMaskSet& masks,
                                               const SamplingStrategy& strategy) {
  strategy.validate();
  std::vector<QueryPointSet> out;
  if (strategy.kind == StrategyKind::kManual) {
    require(!strategy.manual_points.empty(), ErrorCode::kInvalidArgument,
            "manual strategy without points");
    for (const auto& [id, pts] : strategy.manual_points) {
      require(!pts.empty(), ErrorCode::kInvalidArgument,
              "instance " + std::to_string(id) + " has no manual points");
      for (const auto& p : pts) {
        require(frame.contains(p), ErrorCode::kInvalidArgument,
                "manual point outside frame for instance " + std::to_string(id));
      }
      out.push_back({id, pts, frame.index()});
    }
    return out;
  }
  for (const auto& [id, mask] : masks.masks()) {
    require(mask.size() == frame.size(), ErrorCode::kInvalidArgument,
            "instance mask dimensions differ from the frame");
    out.push_back({id, sample_instance(frame, mask, id, strategy), frame.index()});
  }
  return out;
}

}  // namespace tapseg::sampling
