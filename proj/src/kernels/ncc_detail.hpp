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

#include <cmath>
#include <limits>

#include "tapseg/kernels/kernels.hpp"

namespace tapseg::kernels::detail {

// Zero-mean normalized cross-correlation between the template window centred
// on cell (tr, tc) of `prev` and the window centred on (cr, cc) of `cur`.
// Pixels falling outside either image are skipped; fewer than half of the
// window valid, or a flat window, scores -1.
inline double ncc_at(const GrayImage& prev, const GrayImage& cur, int tr, int tc, int cr,
                     int cc, int radius) {
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  int n = 0;
  for (int u = -radius; u <= radius; ++u) {
    const int pr = tr + u;
    const int qr = cr + u;
    if (pr < 0 || pr >= prev.height || qr < 0 || qr >= cur.height) continue;
    for (int v = -radius; v <= radius; ++v) {
      const int pc = tc + v;
      const int qc = cc + v;
      if (pc < 0 || pc >= prev.width || qc < 0 || qc >= cur.width) continue;
      const double a = prev.at(pr, pc);
      const double b = cur.at(qr, qc);
      sa += a;
      sb += b;
      saa += a * a;
      sbb += b * b;
      sab += a * b;
      ++n;
    }
  }
  const int side = 2 * radius + 1;
  if (2 * n < side * side) return -1.0;
  const double va = saa - sa * sa / n;
  const double vb = sbb - sb * sb / n;
  if (va <= 1e-9 || vb <= 1e-9) return -1.0;
  return (sab - sa * sb / n) / std::sqrt(va * vb);
}

// Exhaustive integer search; ties resolve to the first offset in raster order.
inline NccMatch match_one(const GrayImage& prev, const GrayImage& cur, const NccQuery& q,
                          NccParams params) {
  NccMatch best;
  if (!std::isfinite(q.from.x) || !std::isfinite(q.from.y) || !std::isfinite(q.predict.x) ||
      !std::isfinite(q.predict.y)) {
    return best;
  }
  const int tc = static_cast<int>(std::floor(q.from.x));
  const int tr = static_cast<int>(std::floor(q.from.y));
  const int sc = tc + static_cast<int>(std::lround(q.predict.x - q.from.x));
  const int sr = tr + static_cast<int>(std::lround(q.predict.y - q.from.y));
  const int s = params.search_radius;
  for (int dy = -s; dy <= s; ++dy) {
    for (int dx = -s; dx <= s; ++dx) {
      const int cr = sr + dy;
      const int cc = sc + dx;
      if (cr < 0 || cr >= cur.height || cc < 0 || cc >= cur.width) continue;
      const double score = ncc_at(prev, cur, tr, tc, cr, cc, params.patch_radius);
      if (score > best.score) {
        best.score = score;
        best.dx = cc - tc;
        best.dy = cr - tr;
      }
    }
  }
  return best;
}

}  // namespace tapseg::kernels::detail
