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

// Release checks. One PASS or FAIL line per criterion, then a summary line.
// The exit status is non-zero when any criterion fails, except those marked
// as known limitations, which still print FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "oracles.hpp"
#include "tapseg/core/error.hpp"
#include "tapseg/core/rle.hpp"
#include "tapseg/evalbench/bench.hpp"
#include "tapseg/evalbench/metrics.hpp"
#include "tapseg/finetune/loss.hpp"
#include "tapseg/finetune/toy.hpp"
#include "tapseg/finetune/train.hpp"
#include "tapseg/pipeline/adapters.hpp"
#include "tapseg/pipeline/pipeline.hpp"
#include "tapseg/sampling/sampling.hpp"
#include "tapseg/synth/scene.hpp"
#include "test_util.hpp"

namespace {

using namespace tapseg;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  double budget_s;  // 0 means no runtime limit
  bool known_limitation;
  std::function<Outcome()> check;
};

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tapseg_accept_" + std::to_string(::getpid()) + "_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

Outcome kmedoids_optimality() {
  auto sweep = [] {
    std::mt19937_64 rng(0);
    std::uniform_int_distribution<int> n_dist(3, 12);
    std::uniform_real_distribution<double> coord(0.0, 64.0);
    std::vector<double> costs;
    int optimal = 0;
    double worst_gap = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
      const int n = n_dist(rng);
      std::vector<Point> pts(n);
      for (auto& p : pts) p = {coord(rng), coord(rng)};
      const int k = 1 + trial % 3;
      const double best = oracle::brute_force_kmedoids(pts, k).cost;
      const double got = sampling::kmedoids_pam(pts, k).cost;
      costs.push_back(got);
      const double tol = 1e-9 * std::max(1.0, best);
      if (std::abs(got - best) <= tol) ++optimal;
      worst_gap = std::max(worst_gap, (got - best) / std::max(1.0, best));
    }
    return std::tuple{costs, optimal, worst_gap};
  };
  const auto [first, optimal, gap] = sweep();
  const auto [second, optimal_again, gap_again] = sweep();
  (void)optimal_again;
  (void)gap_again;
  const bool deterministic = first == second;
  std::string detail = std::to_string(optimal) + "/200 at the exhaustive optimum, worst relative gap " +
                       fmt("%.4g", gap) + (deterministic ? ", repeat run identical" : ", repeat run DIFFERS");
  return {optimal == 200 && deterministic, detail};
}

Outcome metric_identities() {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  int asym = 0;
  for (int i = 0; i < 1000; ++i) {
    const BinaryMask a = testing::random_mask(rng);
    const BinaryMask b = testing::random_mask_of(rng, {a.height(), a.width()}, unit(rng));
    const double j = evalbench::iou(a, b);
    const double d = evalbench::dice(a, b);
    worst = std::max(worst, std::abs(d - 2 * j / (1 + j)));
    asym += j != evalbench::iou(b, a) || d != evalbench::dice(b, a);
  }
  const BinaryMask empty(5, 7);
  const BinaryMask full = testing::full_mask(5, 7);
  const bool degenerate = evalbench::iou(empty, empty) == 1.0 && evalbench::dice(empty, empty) == 1.0 &&
                          evalbench::iou(empty, full) == 0.0 && evalbench::dice(full, empty) == 0.0;
  return {worst <= 1e-12 && asym == 0 && degenerate,
          "max |dice - 2iou/(1+iou)| = " + fmt("%.3g", worst) + ", asymmetric pairs " + std::to_string(asym) +
              (degenerate ? ", empty/empty = 1" : ", degenerate conventions broken")};
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Objective restated on plain vectors.
double reference_total(const std::vector<double>& p, const std::vector<int>& g, double eps) {
  double bce = 0, inter = 0, sp = 0, sg = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pc = std::min(std::max(p[i], 1e-7), 1 - 1e-7);
    bce += -(g[i] * std::log(pc) + (1 - g[i]) * std::log(1 - pc));
    inter += p[i] * g[i];
    sp += p[i];
    sg += g[i];
  }
  return bce / p.size() + 1 - (2 * inter + eps) / (sp + sg + eps);
}

double relative(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

Outcome loss_correctness() {
  using namespace finetune;
  // ln 2 + (1 - 3/5), written out independently of the library.
  const double expected = std::log(2.0) + 0.4;
  const RealMap half{2, 2, {0.5, 0.5, 0.5, 0.5}};
  const double closed = loss(half, testing::mask_from_rows({{1, 1}, {0, 0}})).total;
  const bool closed_ok = std::abs(closed - expected) <= 1e-6 && std::abs(closed - 1.0931471805599453) <= 1e-6;

  std::mt19937_64 rng(11);
  std::normal_distribution<double> logit(0.0, 2.0);
  double worst_logit = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> z(16);
    for (double& v : z) v = logit(rng);
    const BinaryMask g = testing::random_mask_of(rng, {4, 4}, 0.4);
    const std::vector<int> gi(g.bits().begin(), g.bits().end());
    RealMap p{4, 4, std::vector<double>(16)};
    for (int i = 0; i < 16; ++i) p.data[i] = sigmoid(z[i]);
    const RealMap dp = loss_gradient(p, g);
    for (int i = 0; i < 16; ++i) {
      const double analytic = dp.data[i] * p.data[i] * (1 - p.data[i]);
      const double h = 1e-5;
      auto at = [&](double zi) {
        std::vector<double> q = p.data;
        q[i] = sigmoid(zi);
        return reference_total(q, gi, 1.0);
      };
      worst_logit = std::max(worst_logit, relative(analytic, (at(z[i] + h) - at(z[i] - h)) / (2 * h)));
    }
  }

  double worst_param = 0.0;
  const TrainSample s = toy_dataset(1, 0, {16, 16}, 5, 6).train.at(0);
  ToyPromptSegmenter model(3);
  const auto grads = model.backward(s.image, s.prompt_points,
                                    loss_gradient(model.forward(s.image, s.prompt_points), s.gt_mask));
  auto& params = model.parameters();
  for (std::size_t k = 0; k < params.size(); ++k)
    for (std::size_t e = 0; e < params[k].values.size(); ++e) {
      const double orig = params[k].values[e];
      const double h = 1e-6;
      params[k].values[e] = orig + h;
      const double up = loss(model.forward(s.image, s.prompt_points), s.gt_mask).total;
      params[k].values[e] = orig - h;
      const double down = loss(model.forward(s.image, s.prompt_points), s.gt_mask).total;
      params[k].values[e] = orig;
      worst_param = std::max(worst_param, relative(grads[k][e], (up - down) / (2 * h)));
    }

  return {closed_ok && worst_logit <= 1e-4 && worst_param <= 1e-4,
          "closed form " + fmt("%.12f", closed) + ", worst relative gradient error " +
              fmt("%.2g on logits, %.2g on parameters", worst_logit, worst_param)};
}

double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.bits().size(); ++i) {
    inter += a.bits()[i] && b.bits()[i];
    uni += a.bits()[i] || b.bits()[i];
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

pipeline::PipelineConfig click_config(const std::string& tracker, std::uint64_t seed = 0) {
  pipeline::PipelineConfig c;
  c.tracker.name = tracker;
  c.init.mode = pipeline::InitMode::kPoints;
  c.init.points = {{1, {{40.5, 60.5}}}};
  c.strategy.seed = seed;
  return c;
}

std::vector<pipeline::FrameResult> run_scene(const pipeline::PipelineConfig& c, synth::Scene s,
                                             std::int64_t frames = -1) {
  pipeline::Pipeline p(c, pipeline::make_tracker(c.tracker, {synth::motion_field(s)}),
                       pipeline::make_segmenter(c.segmenter));
  if (frames >= 0) s.num_frames = frames;
  pipeline::SyntheticSource src(s);
  std::vector<pipeline::FrameResult> out;
  const auto summary = pipeline::run(src, p, [&](const pipeline::FrameResult& r, const Frame&) { out.push_back(r); });
  if (summary.error) fail(ErrorCode::kState, *summary.error);
  return out;
}

double mean_iou(const std::vector<pipeline::FrameResult>& results, const synth::Scene& s) {
  double sum = 0.0;
  for (const auto& r : results) {
    const auto gt = s.ground_truth(r.frame_index);
    double frame = 0.0;
    for (const auto& [id, m] : gt.masks()) {
      const auto it = r.masks.masks().find(id);
      frame += it == r.masks.masks().end() ? (m.none() ? 1.0 : 0.0) : mask_iou(it->second, m);
    }
    sum += gt.masks().empty() ? 1.0 : frame / static_cast<double>(gt.masks().size());
  }
  return results.empty() ? 0.0 : sum / static_cast<double>(results.size());
}

Outcome end_to_end() {
  const synth::Scene disk = synth::moving_disk_scene();
  const auto oracle_run = run_scene(click_config("oracle"), disk);
  const double oracle_iou = mean_iou(oracle_run, disk);
  const double ncc_iou = mean_iou(run_scene(click_config("ncc_block"), disk), disk);

  const synth::Scene occ = synth::occlusion_scene();
  const auto occ_run = run_scene(click_config("oracle"), occ, 60);
  bool hidden = true;
  for (int t = 40; t <= 49; ++t) hidden = hidden && occ_run.at(t).masks.at(1).none();
  double recovered = 0.0;
  for (int t = 50; t <= 52; ++t)
    recovered = std::max(recovered, mask_iou(occ_run.at(t).masks.at(1), occ.ground_truth(t).at(1)));

  const bool ok = oracle_run.size() == 100 && oracle_iou >= 0.95 && ncc_iou >= 0.90 && hidden && recovered >= 0.9;
  return {ok, "mean IoU " + fmt("%.4f oracle, %.4f ncc_block; best IoU %.4f within 2 frames of reappearance",
                                oracle_iou, ncc_iou, recovered) +
                  (hidden ? "" : "; mask not empty while occluded")};
}

Outcome prefix_equivalence() {
  int mismatched = 0;
  std::size_t compared = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const synth::Scene s = synth::occlusion_scene(seed);
    pipeline::PipelineConfig c = click_config("ncc_block", seed);
    c.init.mode = pipeline::InitMode::kText;
    c.init.points.clear();
    const auto full = run_scene(c, s, 60);
    const auto prefix = run_scene(c, s, 20 + 3 * static_cast<std::int64_t>(seed));
    for (std::size_t t = 0; t < prefix.size(); ++t) {
      ++compared;
      mismatched += pipeline::to_json(prefix[t], false).dump() != pipeline::to_json(full.at(t), false).dump();
    }
  }
  return {mismatched == 0, std::to_string(compared) + " prefix frames over 10 seeds, " +
                               std::to_string(mismatched) + " differ"};
}

Outcome finetune_smoke() {
  using namespace finetune;
  const fs::path dir = scratch("finetune");
  const Dataset data = toy_dataset(8, 0, {32, 32}, 5, 21);
  ToyPromptSegmenter model(1);
  std::vector<double> prompt_before;
  for (const auto& p : model.parameters())
    if (p.group == "prompt_encoder") prompt_before.insert(prompt_before.end(), p.values.begin(), p.values.end());
  TrainConfig config;
  config.epochs = 5;
  config.input_hw = {32, 32};
  config.seed = 17;
  const TrainResult r = train(model, data, config, {dir, "accept", std::nullopt, nullptr});
  std::vector<double> prompt_after;
  for (const auto& p : model.parameters())
    if (p.group == "prompt_encoder") prompt_after.insert(prompt_after.end(), p.values.begin(), p.values.end());
  int increases = 0;
  std::ostringstream losses;
  for (std::size_t e = 0; e < r.epochs.size(); ++e) {
    if (e > 0) increases += r.epochs[e].mean_loss.total > r.epochs[e - 1].mean_loss.total;
    losses << (e ? " " : "") << fmt("%.5f", r.epochs[e].mean_loss.total);
  }
  const bool frozen = !prompt_before.empty() && prompt_before == prompt_after;
  const bool schedule = cosine_lr(1e-5, 0, r.total_steps) == 1e-5 &&
                        cosine_lr(1e-5, r.total_steps, r.total_steps) == 0.0 &&
                        !r.epochs.empty() && r.epochs.front().lr == 1e-5;
  fs::remove_all(dir);
  return {data.train.size() == 8 && r.epochs.size() == 5 && increases <= 1 && frozen && schedule,
          "epoch losses [" + losses.str() + "], " + std::to_string(increases) + " increase(s), prompt encoder " +
              (frozen ? "unchanged" : "CHANGED") + (schedule ? ", lr endpoints exact" : ", lr endpoints off")};
}

Outcome bench_harness() {
  const fs::path dir = scratch("bench");
  synth::Scene s = synth::moving_disk_scene();
  s.num_frames = 220;
  pipeline::SyntheticSource src(s);
  evalbench::BenchOptions o;
  o.device = "acceptance-cpu";
  o.raw_csv = dir / "latency.csv";
  const auto seg = std::make_shared<pipeline::StubSegmenter>(std::chrono::microseconds(2500));
  const evalbench::LatencyBench b = evalbench::bench_latency(
      [seg] {
        pipeline::PipelineConfig c;
        c.init.points = {{1, {{40.5, 60.5}}}};
        return std::make_unique<pipeline::Pipeline>(
            c, std::make_shared<pipeline::StubTracker>(std::chrono::microseconds(2500)), seg);
      },
      src, o);
  const auto rows = evalbench::read_latency_csv(*o.raw_csv);
  fs::remove_all(dir);
  const bool warmup_excluded = !b.measured.empty() && b.measured.front().frame_index == o.warmup_frames;
  return {b.total.p50 >= 5.0 && b.total.p50 <= 7.0 && warmup_excluded && rows.size() == b.measured.size() &&
              b.measured.size() == 200,
          "p50 " + fmt("%.3f ms", b.total.p50) + ", " + std::to_string(b.measured.size()) + " measured, " +
              std::to_string(rows.size()) + " CSV rows" + (warmup_excluded ? "" : ", warmup leaked")};
}

Outcome rle_round_trip() {
  std::mt19937_64 rng(1234);
  int bad = 0;
  for (int i = 0; i < 10000; ++i) {
    const BinaryMask m = testing::random_mask(rng, 48);
    bad += rle_to_mask(mask_to_rle(m), m.height(), m.width()) != m;
  }
  return {bad == 0, "10000 masks, " + std::to_string(bad) + " mismatches"};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"kmedoids_optimality", 10, true, kmedoids_optimality},
      {"metric_identities", 5, false, metric_identities},
      {"loss_correctness", 0, false, loss_correctness},
      {"end_to_end_synthetic", 60, false, end_to_end},
      {"prefix_equivalence", 0, false, prefix_equivalence},
      {"finetune_smoke", 0, false, finetune_smoke},
      {"bench_harness", 0, false, bench_harness},
      {"rle_round_trip", 0, false, rle_round_trip},
  };
  int failed = 0, limitations = 0;
  for (const auto& c : criteria) {
    const auto start = Clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    if (c.budget_s > 0 && secs >= c.budget_s) {
      o.pass = false;
      o.detail += fmt("; over the %.0f s budget", c.budget_s);
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << c.name << ": " << o.detail << fmt(" [%.2f s]", secs)
              << (!o.pass && c.known_limitation ? " (known limitation)" : "") << std::endl;
    if (!o.pass) (c.known_limitation ? limitations : failed) += 1;
  }
  std::cout << criteria.size() - failed - limitations << "/" << criteria.size() << " passed";
  if (limitations) std::cout << ", " << limitations << " known limitation(s)";
  std::cout << std::endl;
  return failed == 0 ? 0 : 1;
}
