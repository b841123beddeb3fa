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

#include <span>
#include <vector>

#include "json.hpp"

namespace tapseg {

struct LatencyStats {
  double p50 = 0.0;
  double p90 = 0.0;
  double p99 = 0.0;
  double mean = 0.0;
  std::size_t count = 0;
};

// Linear interpolation between closest ranks (q in [0, 100]).
double percentile(std::span<const double> sorted, double q);

// Order statistics of the samples; all zero when empty.
LatencyStats summarize(std::vector<double> samples);

nlohmann::json to_json(const LatencyStats& s);

}  // namespace tapseg
