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

#include "tapseg/core/image.hpp"

#include <algorithm>
#include <cmath>

namespace tapseg {

GrayImage to_gray(const Frame& frame) {
  GrayImage gray{frame.height(), frame.width(), {}};
  gray.data.resize(static_cast<std::size_t>(frame.height()) * frame.width());
  const auto rgb = frame.rgb();
  for (std::size_t i = 0; i < gray.data.size(); ++i) {
    gray.data[i] = 0.299f * rgb[3 * i] + 0.587f * rgb[3 * i + 1] + 0.114f * rgb[3 * i + 2];
  }
  return gray;
}

Frame resize_frame(const Frame& frame, Size dst) {
  if (frame.size() == dst) return frame;
  std::vector<std::uint8_t> out(static_cast<std::size_t>(dst.height) * dst.width * 3);
  const double sy = static_cast<double>(frame.height()) / dst.height;
  const double sx = static_cast<double>(frame.width()) / dst.width;
  for (int r = 0; r < dst.height; ++r) {
    const double fy = std::clamp((r + 0.5) * sy - 0.5, 0.0, frame.height() - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, frame.height() - 1);
    const double wy = fy - y0;
    for (int c = 0; c < dst.width; ++c) {
      const double fx = std::clamp((c + 0.5) * sx - 0.5, 0.0, frame.width() - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, frame.width() - 1);
      const double wx = fx - x0;
      for (int ch = 0; ch < 3; ++ch) {
        const double v = (1 - wy) * ((1 - wx) * frame.pixel(y0, x0)[ch] + wx * frame.pixel(y0, x1)[ch]) +
                         wy * ((1 - wx) * frame.pixel(y1, x0)[ch] + wx * frame.pixel(y1, x1)[ch]);
        out[(static_cast<std::size_t>(r) * dst.width + c) * 3 + ch] =
            static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return Frame(frame.index(), frame.timestamp_ms(), dst.height, dst.width, std::move(out));
}

BinaryMask resize_mask_nearest(const BinaryMask& mask, Size dst) {
  if (mask.size() == dst) return mask;
  BinaryMask out(dst.height, dst.width);
  for (int r = 0; r < dst.height; ++r) {
    const int sr = std::min(mask.height() - 1,
                            static_cast<int>((r + 0.5) * mask.height() / dst.height));
    for (int c = 0; c < dst.width; ++c) {
      const int sc = std::min(mask.width() - 1,
                              static_cast<int>((c + 0.5) * mask.width() / dst.width));
      out.set(r, c, mask.at(sr, sc));
    }
  }
  return out;
}

Components connected_components(const BinaryMask& mask) {
  Components comps;
  const int h = mask.height();
  const int w = mask.width();
  comps.labels.assign(static_cast<std::size_t>(h) * w, 0);
  std::vector<int> stack;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const int seed = r * w + c;
      if (!mask.at(r, c) || comps.labels[seed] != 0) continue;
      const int label = comps.count() + 1;
      std::size_t area = 0;
      comps.labels[seed] = label;
      stack.push_back(seed);
      while (!stack.empty()) {
        const int idx = stack.back();
        stack.pop_back();
        ++area;
        const int y = idx / w;
        const int x = idx % w;
        const int nbrs[4][2] = {{y - 1, x}, {y + 1, x}, {y, x - 1}, {y, x + 1}};
        for (const auto& n : nbrs) {
          if (n[0] < 0 || n[0] >= h || n[1] < 0 || n[1] >= w) continue;
          const int nidx = n[0] * w + n[1];
          if (mask.at(n[0], n[1]) && comps.labels[nidx] == 0) {
            comps.labels[nidx] = label;
            stack.push_back(nidx);
          }
        }
      }
      comps.areas.push_back(area);
    }
  }
  return comps;
}

BinaryMask component_mask(const Components& comps, int label, Size size) {
  BinaryMask out(size.height, size.width);
  auto bits = out.bits();
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = comps.labels[i] == label ? 1 : 0;
  return out;
}

}  // namespace tapseg
