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

#include <algorithm>
#include <cmath>
#include <limits>

#include "ncc_detail.hpp"
#include "tapseg/kernels/kernels.hpp"

namespace tapseg::kernels::serial {

OverlapCounts overlap_counts(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  OverlapCounts out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a[i] != 0;
    const bool y = b[i] != 0;
    out.intersection += x && y;
    out.count_a += x;
    out.count_b += y;
  }
  return out;
}

LossSums loss_sums(std::span<const double> prob, std::span<const std::uint8_t> gt,
                   double clamp_eps) {
  LossSums s;
  for (std::size_t i = 0; i < prob.size(); ++i) {
    const double p = prob[i];
    const double g = gt[i] ? 1.0 : 0.0;
    const double pc = std::clamp(p, clamp_eps, 1.0 - clamp_eps);
    s.bce += -(g * std::log(pc) + (1.0 - g) * std::log(1.0 - pc));
    s.inter += p * g;
    s.pred += p;
    s.target += g;
  }
  return s;
}

// Direct form: for every pixel, rebuild the 3x3 window of central-difference
// gradients and take the smaller eigenvalue of the summed structure tensor.
std::vector<float> min_eigen_map(const GrayImage& gray) {
  const int h = gray.height;
  const int w = gray.width;
  auto at = [&](int r, int c) {
    return gray.at(std::clamp(r, 0, h - 1), std::clamp(c, 0, w - 1));
  };
  std::vector<float> out(static_cast<std::size_t>(h) * w, 0.0f);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double sxx = 0, sxy = 0, syy = 0;
      for (int u = -1; u <= 1; ++u) {
        for (int v = -1; v <= 1; ++v) {
          const int y = r + u;
          const int x = c + v;
          if (y < 0 || y >= h || x < 0 || x >= w) continue;
          const double gx = 0.5 * (at(y, x + 1) - at(y, x - 1));
          const double gy = 0.5 * (at(y + 1, x) - at(y - 1, x));
          sxx += gx * gx;
          sxy += gx * gy;
          syy += gy * gy;
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
  std::vector<NccMatch> out;
  out.reserve(queries.size());
  for (const auto& q : queries) out.push_back(detail::match_one(prev, cur, q, params));
  return out;
}

// Recomputes the full clustering cost for every candidate swap.
std::vector<double> pam_swap_deltas(const PamState& st) {
  const std::size_t n = st.points.size();
  const std::size_t k = st.medoids.size();
  std::vector<double> deltas(n * k, std::numeric_limits<double>::infinity());
  double current = 0.0;
  for (std::size_t j = 0; j < n; ++j) current += st.d1[j];
  std::vector<std::size_t> trial(st.medoids.begin(), st.medoids.end());
  for (std::size_t h = 0; h < n; ++h) {
    if (st.is_medoid[h]) continue;
    for (std::size_t slot = 0; slot < k; ++slot) {
      trial.assign(st.medoids.begin(), st.medoids.end());
      trial[slot] = h;
      double cost = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t m : trial) {
          best = std::min(best, std::hypot(st.points[j].x - st.points[m].x,
                                           st.points[j].y - st.points[m].y));
        }
        cost += best;
      }
      deltas[h * k + slot] = cost - current;
    }
  }
  return deltas;
}

}  // namespace tapseg::kernels::serial
