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

// Serial reference kernels against their OpenMP counterparts. Each kernel is
// registered twice under <name>/serial and <name>/omp with identical inputs.

#include <cmath>
#include <limits>
#include <random>

#include <benchmark/benchmark.h>

#include "tapseg/kernels/kernels.hpp"

namespace {

using namespace tapseg;

std::vector<std::uint8_t> random_bits(std::size_t n, double density, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution bit(density);
  std::vector<std::uint8_t> out(n);
  for (auto& b : out) b = bit(rng) ? 1 : 0;
  return out;
}

GrayImage textured(int h, int w, double shift) {
  GrayImage g{h, w, std::vector<float>(static_cast<std::size_t>(h) * w)};
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      g.data[static_cast<std::size_t>(r) * w + c] =
          static_cast<float>(128.0 + 60.0 * std::sin(0.21 * (c + shift)) * std::cos(0.17 * r) +
                             30.0 * std::sin(0.05 * (r + c + shift)));
  return g;
}

struct Pam {
  std::vector<Point> points;
  std::vector<std::size_t> medoids;
  std::vector<std::uint8_t> is_medoid;
  std::vector<std::size_t> nearest;
  std::vector<double> d1;
  std::vector<double> d2;

  Pam(std::size_t n, std::size_t k) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> coord(0.0, 256.0);
    for (std::size_t i = 0; i < n; ++i) points.push_back({coord(rng), coord(rng)});
    is_medoid.assign(n, 0);
    for (std::size_t j = 0; j < k; ++j) {
      medoids.push_back(j * (n / k));
      is_medoid[medoids.back()] = 1;
    }
    for (const Point& p : points) {
      double best = std::numeric_limits<double>::infinity();
      double second = best;
      std::size_t slot = 0;
      for (std::size_t j = 0; j < k; ++j) {
        const Point& m = points[medoids[j]];
        const double d = std::hypot(p.x - m.x, p.y - m.y);
        if (d < best) {
          second = best;
          best = d;
          slot = j;
        } else if (d < second) {
          second = d;
        }
      }
      nearest.push_back(slot);
      d1.push_back(best);
      d2.push_back(second);
    }
  }

  kernels::PamState state() const { return {points, medoids, is_medoid, nearest, d1, d2}; }
};

template <auto Fn>
void overlap(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_bits(n, 0.3, 1);
  const auto b = random_bits(n, 0.4, 2);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(a, b));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}

template <auto Fn>
void loss(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto gt = random_bits(n, 0.3, 3);
  std::vector<double> prob(n);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (auto& p : prob) p = unit(rng);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(prob, gt, 1e-7));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}

template <auto Fn>
void min_eigen(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const GrayImage g = textured(side, side, 0.0);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(g));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * side * side);
}

template <auto Fn>
void ncc(benchmark::State& state) {
  const GrayImage prev = textured(240, 320, 0.0);
  const GrayImage cur = textured(240, 320, 3.0);
  std::vector<kernels::NccQuery> queries;
  for (int i = 0; i < state.range(0); ++i) {
    const Point p{40.0 + (i * 37) % 240, 40.0 + (i * 23) % 160};
    queries.push_back({p, p});
  }
  for (auto _ : state) benchmark::DoNotOptimize(Fn(prev, cur, queries, kernels::NccParams{}));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * queries.size()));
}

template <auto Fn>
void pam(benchmark::State& state) {
  const Pam p(static_cast<std::size_t>(state.range(0)), 5);
  const kernels::PamState s = p.state();
  for (auto _ : state) benchmark::DoNotOptimize(Fn(s));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * p.points.size()));
}

BENCHMARK(overlap<kernels::serial::overlap_counts>)->Name("overlap_counts/serial")->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(overlap<kernels::omp::overlap_counts>)->Name("overlap_counts/omp")->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(loss<kernels::serial::loss_sums>)->Name("loss_sums/serial")->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(loss<kernels::omp::loss_sums>)->Name("loss_sums/omp")->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(min_eigen<kernels::serial::min_eigen_map>)->Name("min_eigen_map/serial")->Arg(128)->Arg(512);
BENCHMARK(min_eigen<kernels::omp::min_eigen_map>)->Name("min_eigen_map/omp")->Arg(128)->Arg(512);
BENCHMARK(ncc<kernels::serial::ncc_match>)->Name("ncc_match/serial")->Arg(8)->Arg(64);
BENCHMARK(ncc<kernels::omp::ncc_match>)->Name("ncc_match/omp")->Arg(8)->Arg(64);
BENCHMARK(pam<kernels::serial::pam_swap_deltas>)->Name("pam_swap_deltas/serial")->Arg(300)->Arg(1500);
BENCHMARK(pam<kernels::omp::pam_swap_deltas>)->Name("pam_swap_deltas/omp")->Arg(300)->Arg(1500);

}  // namespace

int main(int argc, char** argv) {
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::AddCustomContext("omp_threads", std::to_string(tapseg::kernels::max_threads()));
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
