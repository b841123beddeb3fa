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

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "ncc_detail.hpp"
#include "tapseg/kernels/kernels.hpp"

namespace tapseg::kernels {

int max_threads() { return omp_get_max_threads(); }

namespace omp {

OverlapCounts overlap_counts(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  const std::int64_t n = static_cast<std::int64_t>(a.size());
  std::uint64_t inter = 0, ca = 0, cb = 0;
#pragma omp parallel for reduction(+ : inter, ca, cb) schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const bool x = a[i] != 0;
    const bool y = b[i] != 0;
    inter += x && y;
    ca += x;
    cb += y;
  }
  return {inter, ca, cb};
}

LossSums loss_sums(std::span<const double> prob, std::span<const std::uint8_t> gt,
                   double clamp_eps) {
  const std::int64_t n = static_cast<std::int64_t>(prob.size());
  double bce = 0, inter = 0, pred = 0, target = 0;
#pragma omp parallel for reduction(+ : bce, inter, pred, target) schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const double p = prob[i];
    const double g = gt[i] ? 1.0 : 0.0;
    const double pc = std::clamp(p, clamp_eps, 1.0 - clamp_eps);
    bce += -(g * std::log(pc) + (1.0 - g) * std::log(1.0 - pc));
    inter += p * g;
    pred += p;
    target += g;
  }
  return {bce, inter, pred, target};
}

// Separable form: gradient products once per pixel, then a 3x3 box sum.
std::vector<float> min_eigen_map(const GrayImage& gray) {
  const int h = gray.height;
  const int w = gray.width;
  const std::size_t n = static_cast<std::size_t>(h) * w;
  std::vector<double> ixx(n), ixy(n), iyy(n);
#pragma omp parallel for schedule(static)
  for (int r = 0; r < h; ++r) {
    const int ru = std::max(r - 1, 0);
    const int rd = std::min(r + 1, h - 1);
    for (int c = 0; c < w; ++c) {
      const int cl = std::max(c - 1, 0);
      const int cr = std::min(c + 1, w - 1);
      const double gx = 0.5 * (gray.at(r, cr) - gray.at(r, cl));
      const double gy = 0.5 * (gray.at(rd, c) - gray.at(ru, c));
      const std::size_t i = static_cast<std::size_t>(r) * w + c;
      ixx[i] = gx * gx;
      ixy[i] = gx * gy;
      iyy[i] = gy * gy;
    }
  }
  std::vector<float> out(n, 0.0f);
#pragma omp parallel for schedule(static)
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double sxx = 0, sxy = 0, syy = 0;
      for (int y = std::max(r - 1, 0); y <= std::min(r + 1, h - 1); ++y) {
        for (int x = std::max(c - 1, 0); x <= std::min(c + 1, w - 1); ++x) {
          const std::size_t i = static_cast<std::size_t>(y) * w + x;
          sxx += ixx[i];
          sxy += ixy[i];
          syy += iyy[i];
        }
      }
      const double half_trace = 0.5 * (sxx + syy);
      const double diff = 0.5 * (sxx - syy);
      const double lambda = half_trace - std::sqrt(diff * diff + sxy * sxy);
      out[static_cast<std::size_t>(r) * w + c] = static_cast<float>(std::max(lambda, 0.0));
    }
  }
  return out;
}

std::vector<NccMatch> ncc_match(const GrayImage& prev, const GrayImage& cur,
                                std::span<const NccQuery> queries, NccParams params) {
  const std::int64_t n = static_cast<std::int64_t>(queries.size());
  std::vector<NccMatch> out(queries.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < n; ++i) {
    out[i] = detail::match_one(prev, cur, queries[i], params);
  }
  return out;
}

// FastPAM1-style: one pass over the points per candidate yields the deltas
// for every medoid slot at once.
std::vector<double> pam_swap_deltas(const PamState& st) {
  const std::int64_t n = static_cast<std::int64_t>(st.points.size());
  const std::size_t k = st.medoids.size();
  std::vector<double> deltas(static_cast<std::size_t>(n) * k,
                             std::numeric_limits<double>::infinity());
#pragma omp parallel
  {
    std::vector<double> per_slot(k);
#pragma omp for schedule(static)
    for (std::int64_t h = 0; h < n; ++h) {
      if (st.is_medoid[h]) continue;
      std::fill(per_slot.begin(), per_slot.end(), 0.0);
      double shared = 0.0;
      const Point ph = st.points[h];
      for (std::int64_t j = 0; j < n; ++j) {
        const double dj = std::hypot(st.points[j].x - ph.x, st.points[j].y - ph.y);
        if (dj < st.d1[j]) {
          shared += dj - st.d1[j];
        } else {
          per_slot[st.nearest_slot[j]] += std::min(dj, st.d2[j]) - st.d1[j];
        }
      }
      for (std::size_t slot = 0; slot < k; ++slot) {
        deltas[static_cast<std::size_t>(h) * k + slot] = shared + per_slot[slot];
      }
    }
  }
  return deltas;
}

}  // namespace omp
}  // namespace tapseg::kernels
