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
#include <chrono>
#include <filesystem>
#include <random>
#include <thread>

#include <unistd.h>

#include <gtest/gtest.h>

#include "tapseg/core/error.hpp"
#include "tapseg/evalbench/bench.hpp"
#include "tapseg/evalbench/dataset.hpp"
#include "tapseg/evalbench/metrics.hpp"
#include "tapseg/finetune/toy.hpp"
#include "tapseg/io/image_io.hpp"
#include "tapseg/pipeline/adapters.hpp"
#include "tapseg/synth/scene.hpp"
#include "test_util.hpp"

namespace tapseg::evalbench {
namespace {

namespace fs = std::filesystem;
using pipeline::FrameResult;

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::kIo;
}

std::string message_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tapseg_eval_" + std::to_string(::getpid()) + "_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

TEST(Metrics, HandCountedBlocks) {
  const BinaryMask a = testing::mask_from_rows({{1, 1, 0}, {1, 1, 0}});
  const BinaryMask b = testing::mask_from_rows({{0, 1, 1}, {0, 1, 1}});
  EXPECT_DOUBLE_EQ(iou(a, b), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(dice(a, b), 0.5);
  EXPECT_EQ(iou(a, a), 1.0);
  EXPECT_EQ(dice(a, a), 1.0);
  const BinaryMask c = testing::mask_from_rows({{0, 0, 1}, {0, 0, 0}});
  EXPECT_EQ(dice(a, c), 0.0);
  EXPECT_EQ(iou(BinaryMask(2, 3), BinaryMask(2, 3)), 1.0);
  EXPECT_EQ(dice(BinaryMask(2, 3), BinaryMask(2, 3)), 1.0);
  EXPECT_EQ(iou(a, BinaryMask(2, 3)), 0.0);
  EXPECT_EQ(dice(BinaryMask(2, 3), a), 0.0);
  EXPECT_EQ(code_of([&] { iou(a, BinaryMask(3, 2)); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([&] { dice(a, BinaryMask(2, 2)); }), ErrorCode::kInvalidArgument);
}

TEST(Metrics, DiceIouIdentityAndSymmetry) {
  std::mt19937_64 rng(1234);
  std::uniform_real_distribution<double> density(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const Size size{1 + static_cast<int>(rng() % 40), 1 + static_cast<int>(rng() % 40)};
    const BinaryMask a = testing::random_mask_of(rng, size, density(rng));
    const BinaryMask b = testing::random_mask_of(rng, size, density(rng));
    std::size_t inter = 0, uni = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.bits().size(); ++i) {
      inter += a.bits()[i] & b.bits()[i];
      uni += a.bits()[i] | b.bits()[i];
      na += a.bits()[i];
      nb += b.bits()[i];
    }
    const double i_ref = uni ? static_cast<double>(inter) / uni : 1.0;
    const double d_ref = na + nb ? 2.0 * inter / (na + nb) : 1.0;
    const double i = iou(a, b);
    const double d = dice(a, b);
    EXPECT_DOUBLE_EQ(i, i_ref);
    EXPECT_DOUBLE_EQ(d, d_ref);
    EXPECT_NEAR(d, 2 * i / (1 + i), 1e-12);
    EXPECT_EQ(i, iou(b, a));
    EXPECT_EQ(d, dice(b, a));
    EXPECT_GE(d, i);
  }
}

InstanceMaskSet set_of(Size size, std::initializer_list<std::pair<InstanceId, BinaryMask>> masks,
                       std::int64_t frame = 0) {
  InstanceMaskSet s(frame, size);
  for (const auto& [id, m] : masks) s.insert(id, m);
  return s;
}

BinaryMask block(Size size, int r0, int c0, int r1, int c1) {
  BinaryMask m(size.height, size.width);
  for (int r = r0; r < r1; ++r)
    for (int c = c0; c < c1; ++c) m.set(r, c, true);
  return m;
}

TEST(Matching, GreedyTakesBestPairFirstAndNeverReusesGt) {
  const Size sz{10, 10};
  // pred 5 overlaps gt 1 strongly and gt 2 weakly; pred 6 overlaps gt 1 only.
  const auto gt = set_of(sz, {{1, block(sz, 0, 0, 4, 4)}, {2, block(sz, 0, 4, 4, 8)}});
  const auto pred = set_of(sz, {{5, block(sz, 0, 0, 4, 5)}, {6, block(sz, 0, 0, 4, 2)}});
  const auto m = greedy_match(pred, gt);
  // (5, 1) wins with IoU 0.8; both 6 and gt 2 are then left without a
  // partner that overlaps.
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m[0], (std::pair<InstanceId, InstanceId>{5, 1}));
  // pred 6 does not touch gt 2, so only one pair survives there.
  const auto solo = greedy_match(set_of(sz, {{6, block(sz, 0, 0, 4, 2)}}), set_of(sz, {{2, block(sz, 0, 4, 4, 8)}}));
  EXPECT_TRUE(solo.empty());
}

FrameResult result_of(std::int64_t idx, InstanceMaskSet masks) {
  FrameResult r;
  r.frame_index = idx;
  r.masks = std::move(masks);
  return r;
}

TEST(Evaluate, FrameAveragingThenVideoMean) {
  const Size sz{8, 8};
  GroundTruth gt;
  gt.frames[0] = set_of(sz, {{1, block(sz, 0, 0, 2, 2)}, {2, block(sz, 4, 4, 8, 8)}});
  gt.frames[1] = set_of(sz, {{1, block(sz, 0, 0, 2, 2)}});
  std::vector<FrameResult> results = {
      result_of(0, set_of(sz, {{9, block(sz, 0, 0, 2, 2)}})),  // gt 2 missed
      result_of(1, set_of(sz, {{9, block(sz, 0, 0, 2, 4)}})),  // iou 1/2, dice 2/3
  };
  const EvalResult r = evaluate_run(results, gt);
  ASSERT_EQ(r.records.size(), 3u);
  EXPECT_EQ(*r.records[0].pred_instance, 9);
  EXPECT_FALSE(r.records[1].pred_instance.has_value());
  EXPECT_DOUBLE_EQ(r.summary.mean_iou, (0.5 + 0.5) / 2);
  EXPECT_DOUBLE_EQ(r.summary.mean_dice, (0.5 + 2.0 / 3.0) / 2);

  GroundTruth bin = gt;
  bin.kind = GtKind::kBinary;
  results[0].masks = set_of(sz, {{3, block(sz, 0, 0, 2, 2)}, {4, block(sz, 4, 4, 8, 8)}});
  const EvalResult b = evaluate_run(results, bin);
  ASSERT_EQ(b.records.size(), 2u);
  EXPECT_FALSE(b.records[0].gt_instance.has_value());
  EXPECT_EQ(b.records[0].iou, 1.0);
  EXPECT_EQ(to_json(b.records[0])["instance_id"], "binary");

  // Perfect predictions.
  std::vector<FrameResult> perfect = {result_of(0, gt.frames[0]), result_of(1, gt.frames[1])};
  EXPECT_EQ(evaluate_run(perfect, gt).summary.mean_iou, 1.0);
  EXPECT_EQ(evaluate_run(perfect, gt).summary.mean_dice, 1.0);
}

TEST(Evaluate, AlignmentErrorsListFrames) {
  const Size sz{4, 4};
  GroundTruth gt;
  for (int i : {0, 1, 2, 7}) gt.frames[i] = set_of(sz, {{1, block(sz, 0, 0, 2, 2)}});
  std::vector<FrameResult> results;
  for (int i : {0, 1, 2, 5}) results.push_back(result_of(i, gt.frames[0]));
  EXPECT_EQ(code_of([&] { evaluate_run(results, gt); }), ErrorCode::kAlignment);
  const std::string msg = message_of([&] { evaluate_run(results, gt); });
  EXPECT_NE(msg.find("[5]"), std::string::npos) << msg;
  EXPECT_NE(msg.find("[7]"), std::string::npos) << msg;
  results.back().frame_index = 7;
  results.push_back(result_of(9, gt.frames[0]));
  EXPECT_EQ(code_of([&] { evaluate_run(results, gt); }), ErrorCode::kAlignment);
  EXPECT_EQ(evaluate_run(results, gt, {true}).summary.frames, 4u);
}

TEST(Evaluate, OracleRunOnSyntheticVideo) {
  const synth::Scene s = synth::moving_disk_scene();
  pipeline::PipelineConfig c;
  c.tracker.name = "oracle";
  c.init.points = {{1, {{40.5, 60.5}}}};
  pipeline::Pipeline p(c, pipeline::make_tracker(c.tracker, {synth::motion_field(s)}),
                       pipeline::make_segmenter(c.segmenter));
  pipeline::SyntheticSource src(s);
  std::vector<FrameResult> results;
  pipeline::run(src, p, [&](const FrameResult& r, const Frame&) { results.push_back(r); });
  GroundTruth gt;
  for (std::int64_t t = 0; t < s.num_frames; ++t) gt.frames[t] = s.ground_truth(t);
  const EvalResult r = evaluate_run(results, gt);
  EXPECT_EQ(r.summary.frames, 100u);
  EXPECT_GE(r.summary.mean_iou, 0.95);
  EXPECT_GE(r.summary.mean_dice, r.summary.mean_iou);
}

TEST(Dataset, IngestPairsAndReportsOrphans) {
  const fs::path root = scratch("ds");
  fs::create_directories(root / "frames");
  fs::create_directories(root / "masks");
  const Size sz{12, 16};
  for (int i = 0; i < 10; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%06d.png", i);
    io::write_frame_png(root / "frames" / name, testing::solid_frame(12, 16, static_cast<std::uint8_t>(i * 10)));
    io::write_binary_mask_png(root / "masks" / name, block(sz, 0, 0, 3, 3 + i));
  }
  DatasetLayout layout;
  layout.mask_encoding = MaskEncoding::kBinary;
  const DatasetHandle d = ingest_dataset(root, layout);
  ASSERT_EQ(d.pairs.size(), 10u);
  EXPECT_EQ(d.pairs[4].frame_index, 4);
  const GroundTruth gt = d.load_ground_truth();
  EXPECT_EQ(gt.kind, GtKind::kBinary);
  EXPECT_EQ(gt.frames.at(2).at(1).count(), 15u);
  EXPECT_EQ(to_json(d)["pairs"].size(), 10u);

  fs::remove(root / "masks" / "frame_000007.png");
  EXPECT_EQ(code_of([&] { ingest_dataset(root, layout); }), ErrorCode::kManifest);
  const std::string msg = message_of([&] { ingest_dataset(root, layout); });
  EXPECT_NE(msg.find("frame 7 without mask"), std::string::npos) << msg;
  EXPECT_NE(msg.find("frame_000007.png"), std::string::npos) << msg;
  EXPECT_EQ(code_of([&] { ingest_dataset(root / "nope", layout); }), ErrorCode::kIo);
  fs::remove_all(root);
}

TEST(Dataset, PaletteMaskGivesInstances) {
  const fs::path root = scratch("pal");
  fs::create_directories(root / "frames");
  fs::create_directories(root / "masks");
  const Size sz{10, 10};
  io::write_frame_png(root / "frames" / "frame_000003.png", testing::solid_frame(10, 10, 5));
  io::write_palette_mask_png(root / "masks" / "frame_000003.png",
                             set_of(sz, {{1, block(sz, 0, 0, 3, 3)}, {2, block(sz, 5, 5, 9, 9)}}));
  const DatasetHandle d = ingest_dataset(root, {});
  const InstanceMaskSet m = d.load_mask(0);
  EXPECT_EQ(m.masks().size(), 2u);
  EXPECT_EQ(m.at(2).count(), 16u);
  fs::remove_all(root);
}

// Costs 50 ms on its first prediction only.
class LazyInit : public pipeline::StubSegmenter {
 public:
  LazyInit() : StubSegmenter(std::chrono::microseconds(0)) {}
  std::vector<GrayImage> predict(const Frame& f, std::span<const segmenters::PromptBundle> p) const override {
    if (first_) {
      first_ = false;
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    return StubSegmenter::predict(f, p);
  }

 private:
  mutable bool first_ = true;
};

PipelineFactory stub_factory(std::shared_ptr<const segmenters::SegmenterAdapter> seg, double track_ms) {
  return [seg, track_ms] {
    pipeline::PipelineConfig c;
    c.init.points = {{1, {{40.5, 60.5}}}};
    return std::make_unique<pipeline::Pipeline>(
        c, std::make_shared<pipeline::StubTracker>(std::chrono::microseconds(std::llround(track_ms * 1000))), seg);
  };
}

TEST(Bench, StubCostAndRawDump) {
  const fs::path dir = scratch("bench");
  synth::Scene s = synth::moving_disk_scene();
  s.num_frames = 220;
  pipeline::SyntheticSource src(s);
  BenchOptions o;
  o.device = "test-cpu";
  o.raw_csv = dir / "latency.csv";
  const auto seg = std::make_shared<pipeline::StubSegmenter>(std::chrono::microseconds(2500));
  const LatencyBench b = bench_latency(stub_factory(seg, 2.5), src, o);
  EXPECT_EQ(b.measured.size(), 200u);
  EXPECT_EQ(b.measured.front().frame_index, 20);
  EXPECT_GE(b.total.p50, 5.0);
  EXPECT_LE(b.total.p50, 7.0);
  EXPECT_LE(b.total.p50, b.total.p90);
  EXPECT_LE(b.total.p90, b.total.p99);
  const auto rows = read_latency_csv(*o.raw_csv);
  ASSERT_EQ(rows.size(), 200u);
  std::vector<double> total;
  for (const auto& r : rows) total.push_back(r.timings.total_ms);
  const LatencyStats again = summarize(total);
  EXPECT_EQ(again.p50, b.total.p50);
  EXPECT_EQ(again.p99, b.total.p99);
  fs::remove_all(dir);
}

TEST(Bench, WarmupHidesLazyInitAndShortVideosFail) {
  synth::Scene s = synth::moving_disk_scene();
  s.num_frames = 40;
  pipeline::SyntheticSource src(s);
  BenchOptions o;
  o.warmup_frames = 5;
  o.min_measured_frames = 30;
  const LatencyBench b = bench_latency(stub_factory(std::make_shared<LazyInit>(), 0.0), src, o);
  EXPECT_EQ(b.measured.size(), 35u);
  EXPECT_LT(b.total.p99, 50.0);

  pipeline::SyntheticSource short_src(s);
  o.min_measured_frames = 36;
  EXPECT_EQ(code_of([&] { bench_latency(stub_factory(std::make_shared<LazyInit>(), 0.0), short_src, o); }),
            ErrorCode::kInsufficientData);
}

class Introspective : public pipeline::StubSegmenter, public ParameterIntrospection, public MemoryIntrospection {
 public:
  Introspective() : StubSegmenter(std::chrono::microseconds(0)) {}
  std::vector<ParameterGroupSize> parameter_group_sizes() const override {
    return {{"image_encoder", 400'000}, {"prompt_encoder", 500'000}, {"mask_decoder", 100'000}};
  }
  std::optional<double> peak_device_memory_gb() const override { return 2.8; }
};

TEST(Params, MillionsToOneDecimal) {
  const std::vector<ParameterGroupSize> groups = {
      {"image_encoder", 400'000}, {"prompt_encoder", 500'000}, {"mask_decoder", 100'000}};
  finetune::FreezeMap none{false, false, false};
  EXPECT_EQ(count_learnable_params(groups, none), 1.0);
  EXPECT_EQ(count_learnable_params(groups, finetune::FreezeMap{}), 0.5);
  EXPECT_EQ(count_learnable_params(Introspective(), finetune::FreezeMap{}), 0.5);
  EXPECT_EQ(code_of([] { count_learnable_params(pipeline::StubSegmenter(std::chrono::microseconds(0)), {}); }),
            ErrorCode::kCapability);
  finetune::ToyPromptSegmenter toy;
  EXPECT_EQ(count_learnable_params(toy, none), 0.0);
  const std::vector<ParameterGroupSize> encoder_only = {{"image_encoder", 10'130'000}};
  EXPECT_EQ(count_learnable_params(encoder_only, none), 10.1);
}

TEST(Report, MemoryProvenanceAndTables) {
  const RssSample base = sample_rss();
  EXPECT_GT(base.current, 0u);
  const Introspective intro;
  EXPECT_EQ(inference_memory(&intro, base).provenance, "backend:stub");
  EXPECT_EQ(inference_memory(&intro, base).gb, 2.8);
  const MemoryReading rss = inference_memory(nullptr, base);
  EXPECT_EQ(rss.provenance, "rss_delta");
  EXPECT_GE(rss.gb, 0.0);

  BenchReport a{"ours", "synthetic", 0.844, 0.91, {{"cpu", {1, 2, 3, 1.5, 10}}}, rss, 10.1};
  BenchReport b{"baseline", "synthetic", 0.5, 0.6, {}, std::nullopt, std::nullopt};
  const std::vector<BenchReport> both = {a, b};
  const std::string acc = format_accuracy_table(both);
  EXPECT_NE(acc.find("84.4"), std::string::npos) << acc;
  const std::string eff = format_efficiency_table(both);
  EXPECT_NE(eff.find("Latency cpu (ms)"), std::string::npos) << eff;
  EXPECT_NE(eff.find("rss_delta"), std::string::npos) << eff;
  // Every line of a table has the same width.
  std::size_t width = eff.find('\n');
  for (std::size_t pos = 0; pos < eff.size();) {
    const std::size_t end = eff.find('\n', pos);
    EXPECT_EQ(end - pos, width);
    pos = end + 1;
  }
  const auto j = to_json(a);
  EXPECT_EQ(j["latency_ms"]["cpu"]["p50"], 1);
  EXPECT_EQ(j["memory_provenance"], "rss_delta");
  EXPECT_TRUE(to_json(b)["learnable_params_m"].is_null());
}

}  // namespace
}  // namespace tapseg::evalbench
