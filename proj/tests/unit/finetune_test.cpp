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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <unistd.h>

#include <gtest/gtest.h>

#include "tapseg/core/error.hpp"
#include "tapseg/finetune/data.hpp"
#include "tapseg/finetune/loss.hpp"
#include "tapseg/finetune/toy.hpp"
#include "tapseg/finetune/train.hpp"
#include "tapseg/io/image_io.hpp"
#include "test_util.hpp"

namespace tapseg::finetune {
namespace {

namespace fs = std::filesystem;

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::kIo;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tapseg_ft_" + std::to_string(::getpid()) + "_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

RealMap constant_map(int h, int w, double v) {
  return {h, w, std::vector<double>(static_cast<std::size_t>(h) * w, v)};
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Scalar restatement of the objective, kept apart from the library path.
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

TEST(Loss, ClosedFormHalfOnes) {
  const RealMap p = constant_map(2, 2, 0.5);
  const BinaryMask g = testing::mask_from_rows({{1, 1}, {0, 0}});
  const LossReport r = loss(p, g);
  // ln 2 from the cross entropy, 1 - 3/5 from soft Dice.
  EXPECT_NEAR(r.bce, 0.6931471805599453, 1e-12);
  EXPECT_NEAR(r.dice, 0.4, 1e-12);
  EXPECT_NEAR(r.total, 1.0931471805599453, 1e-6);
  EXPECT_EQ(r.total, r.bce + r.dice);
}

TEST(Loss, PerfectAndEmptyPredictions) {
  const BinaryMask g = testing::mask_from_rows({{1, 0, 1}, {0, 1, 0}});
  RealMap p = constant_map(2, 3, 0.0);
  for (std::size_t i = 0; i < p.data.size(); ++i) p.data[i] = g.bits()[i];
  const LossReport perfect = loss(p, g);
  EXPECT_LT(perfect.bce, 1e-6);
  EXPECT_NEAR(perfect.dice, 0.0, 1e-12);
  const LossReport empty = loss(constant_map(3, 3, 0.0), BinaryMask(3, 3));
  EXPECT_LT(empty.bce, 1e-6);
  EXPECT_EQ(empty.dice, 0.0);
}

TEST(Loss, ShapeMismatchIsRejected) {
  EXPECT_EQ(code_of([] { loss(constant_map(2, 3, 0.5), BinaryMask(3, 2)); }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([] { loss_gradient(constant_map(2, 2, 0.5), BinaryMask(2, 3)); }),
            ErrorCode::kInvalidArgument);
}

TEST(Loss, LogitGradientMatchesCentralDifferences) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> logit(0.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> z(16);
    for (double& v : z) v = logit(rng);
    const BinaryMask g = testing::random_mask_of(rng, {4, 4}, 0.4);
    std::vector<int> gi(g.bits().begin(), g.bits().end());
    RealMap p = constant_map(4, 4, 0);
    for (int i = 0; i < 16; ++i) p.data[i] = sigmoid(z[i]);
    const RealMap dp = loss_gradient(p, g);
    EXPECT_NEAR(loss(p, g).total, reference_total(p.data, gi, 1.0), 1e-12);
    for (int i = 0; i < 16; ++i) {
      const double analytic = dp.data[i] * p.data[i] * (1 - p.data[i]);
      const double h = 1e-5;
      auto at = [&](double zi) {
        std::vector<double> q = p.data;
        q[i] = sigmoid(zi);
        return reference_total(q, gi, 1.0);
      };
      const double numeric = (at(z[i] + h) - at(z[i] - h)) / (2 * h);
      const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
      EXPECT_LE(std::abs(analytic - numeric) / scale, 1e-4) << "trial " << trial << " pixel " << i;
    }
  }
}

TEST(Loss, BoundsAndFlipInvariance) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    const BinaryMask g = testing::random_mask(rng, 12);
    RealMap p = constant_map(g.height(), g.width(), 0);
    for (double& v : p.data) v = unit(rng);
    const LossReport r = loss(p, g);
    EXPECT_GE(r.total, 0.0);
    EXPECT_GE(r.dice, 0.0);
    EXPECT_LE(r.dice, 1.0);
    RealMap pf = p;
    BinaryMask gf = g;
    for (int row = 0; row < g.height(); ++row)
      for (int c = 0; c < g.width(); ++c) {
        pf.data[static_cast<std::size_t>(row) * g.width() + c] =
            p.data[static_cast<std::size_t>(g.height() - 1 - row) * g.width() + (g.width() - 1 - c)];
        gf.set(row, c, g.at(g.height() - 1 - row, g.width() - 1 - c));
      }
    EXPECT_NEAR(loss(pf, gf).total, r.total, 1e-12);
  }
}

TEST(Normalize, PerChannelMinMaxAndConstantGuard) {
  // Channel 0 spans 10..110, channel 1 is constant, channel 2 spans 0..255.
  Frame f(0, 0, 1, 2, {10, 7, 0, 110, 7, 255});
  const TensorImage t = min_max_normalize(f);
  EXPECT_FLOAT_EQ(t.at(0, 0, 0), 0.0f);
  EXPECT_FLOAT_EQ(t.at(0, 1, 0), 1.0f);
  EXPECT_FLOAT_EQ(t.at(0, 0, 1), 0.0f);
  EXPECT_FLOAT_EQ(t.at(0, 1, 1), 0.0f);
  EXPECT_FLOAT_EQ(t.at(0, 1, 2), 1.0f);
  const TensorImage c = min_max_normalize(testing::solid_frame(4, 4, 93));
  for (float v : c.data) EXPECT_EQ(v, 0.0f);
}

TEST(Normalize, StatsStandardizeToZeroMeanUnitStd) {
  const auto ex = toy_examples(3, {16, 16}, 4);
  std::vector<Frame> frames;
  for (const auto& e : ex) frames.push_back(e.image);
  const ChannelStats s = compute_channel_stats(frames, {16, 16});
  std::array<double, 3> sum{}, sq{};
  std::size_t n = 0;
  for (const Frame& f : frames) {
    TensorImage t = min_max_normalize(f);
    standardize(t, s);
    for (std::size_t i = 0; i < t.data.size(); ++i) {
      sum[i % 3] += t.data[i];
      sq[i % 3] += t.data[i] * t.data[i];
    }
    n += 256;
  }
  for (int ch = 0; ch < 3; ++ch) {
    EXPECT_NEAR(sum[ch] / n, 0.0, 1e-5);
    EXPECT_NEAR(sq[ch] / n, 1.0, 1e-4);
  }
  EXPECT_EQ(channel_stats_from_json(to_json(s)).mean, s.mean);
}

SampleParams params_of(Size hw, ChannelStats stats = {}) { return {hw, 5, stats}; }

InstanceMaskSet three_blocks() {
  InstanceMaskSet set(0, {20, 30});
  BinaryMask a(20, 30), b(20, 30), c(20, 30);
  for (int r = 0; r < 5; ++r)
    for (int k = 0; k < 5; ++k) {
      a.set(r, k, true);
      b.set(r + 10, k + 10, true);
      c.set(r + 12, k + 22, true);
    }
  set.insert(1, a);
  set.insert(4, b);
  set.insert(9, c);
  return set;
}

TEST(Samples, OnePerInstanceOrOneForBinary) {
  const Frame img = testing::gray_frame(20, 30, [](int r, int c) { return (r * 7 + c * 3) % 256; });
  const InstanceMaskSet set = three_blocks();
  const SampleSet inst = make_samples(img, set, LabelKind::kInstance, 3, params_of({40, 60}));
  ASSERT_EQ(inst.samples.size(), 3u);
  EXPECT_EQ(inst.samples[1].instance_id, 4);
  const SampleSet bin = make_samples(img, set, LabelKind::kBinary, 3, params_of({40, 60}));
  ASSERT_EQ(bin.samples.size(), 1u);
  EXPECT_EQ(bin.samples[0].gt_mask.count(), 3u * 100u);
  for (const auto* ss : {&inst, &bin})
    for (const TrainSample& s : ss->samples) {
      EXPECT_EQ(s.image.size(), (Size{40, 60}));
      EXPECT_EQ(s.gt_mask.size(), (Size{40, 60}));
      ASSERT_EQ(s.prompt_points.size(), 5u);
      for (const Point& p : s.prompt_points) EXPECT_TRUE(s.gt_mask.contains(p));
    }
  // Doubling the size doubles block coordinates.
  for (const Point& p : inst.samples[0].prompt_points) {
    EXPECT_LT(p.x, 10.0);
    EXPECT_LT(p.y, 10.0);
  }
  const SampleSet again = make_samples(img, set, LabelKind::kInstance, 3, params_of({40, 60}));
  EXPECT_EQ(again.samples[2].prompt_points, inst.samples[2].prompt_points);
}

TEST(Samples, TinyRegionDrawsWithReplacement) {
  const BinaryMask m = testing::mask_from_rows({{0, 0, 0, 0}, {0, 1, 1, 0}, {0, 0, 0, 0}});
  const SampleSet s = make_samples(testing::solid_frame(3, 4, 50), m, 1, params_of({3, 4}));
  ASSERT_EQ(s.samples.size(), 1u);
  ASSERT_EQ(s.samples[0].prompt_points.size(), 5u);
  for (const Point& p : s.samples[0].prompt_points) {
    EXPECT_TRUE(p == (Point{1.5, 1.5}) || p == (Point{2.5, 1.5}));
  }
  // Constant input normalizes to zero everywhere under identity statistics.
  for (float v : s.samples[0].image.data) EXPECT_EQ(v, 0.0f);
}

TEST(Samples, EmptyRegionsAreSkippedWithARecord) {
  InstanceMaskSet set = three_blocks();
  set.insert(12, BinaryMask(20, 30));
  const Frame img = testing::solid_frame(20, 30, 9);
  const SampleSet s = make_samples(img, set, LabelKind::kInstance, 0, params_of({20, 30}));
  EXPECT_EQ(s.samples.size(), 3u);
  ASSERT_EQ(s.skipped.size(), 1u);
  EXPECT_EQ(s.skipped[0].instance_id, 12);
  EXPECT_EQ(code_of([&] { make_samples(img, InstanceMaskSet(0, {20, 30}), LabelKind::kBinary, 0, params_of({8, 8})); }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([&] { make_samples(img, BinaryMask(5, 5), 0, params_of({8, 8})); }),
            ErrorCode::kInvalidArgument);
}

TrainSample toy_sample(std::uint64_t seed, Size hw) {
  const auto ex = toy_examples(1, hw, seed);
  return make_samples(ex[0].image, ex[0].masks, LabelKind::kInstance, seed, params_of(hw)).samples.at(0);
}

TEST(Augment, ReflectionArithmetic) {
  TrainSample s;
  s.image = {4, 1024, std::vector<float>(4 * 1024 * 3, 0.0f)};
  s.gt_mask = BinaryMask(4, 1024);
  s.prompt_points = {{102.4, 50}};
  const TrainSample f = flip(s, true, false);
  EXPECT_NEAR(f.prompt_points[0].x, 921.6, 1e-9);
  EXPECT_EQ(f.prompt_points[0].y, 50);
}

TEST(Augment, IdentityInvolutionAndMembership) {
  const TrainSample s = toy_sample(2, {24, 40});
  const TrainSample same = flip(s, false, false);
  EXPECT_EQ(same.image.data, s.image.data);
  EXPECT_EQ(same.gt_mask, s.gt_mask);
  for (bool lr : {false, true})
    for (bool ud : {false, true}) {
      const TrainSample twice = flip(flip(s, lr, ud), lr, ud);
      EXPECT_EQ(twice.image.data, s.image.data);
      EXPECT_EQ(twice.gt_mask, s.gt_mask);
      EXPECT_EQ(twice.prompt_points, s.prompt_points);
    }
  const TrainSample lr = flip(s, true, false);
  EXPECT_EQ(lr.gt_mask.at(3, 0), s.gt_mask.at(3, 39));
  EXPECT_EQ(lr.image.at(5, 1, 2), s.image.at(5, 38, 2));
  int changed = 0;
  for (std::uint64_t seed = 0; seed < 64; ++seed) {
    const TrainSample a = augment(s, seed);
    for (const Point& p : a.prompt_points) EXPECT_TRUE(a.gt_mask.contains(p));
    changed += !(a.gt_mask == s.gt_mask);
  }
  EXPECT_GT(changed, 32);
  EXPECT_LT(changed, 64);
}

TEST(Schedule, CosineEndpointsAndMidpoint) {
  EXPECT_EQ(cosine_lr(1e-5, 0, 40), 1e-5);
  EXPECT_EQ(cosine_lr(1e-5, 40, 40), 0.0);
  EXPECT_NEAR(cosine_lr(1e-5, 20, 40), 5e-6, 1e-20);
  EXPECT_NEAR(cosine_lr(1e-5, 39, 40), 1e-5 * 0.5 * (1 + std::cos(M_PI * 39 / 40)), 1e-22);
  for (int s = 1; s <= 40; ++s) EXPECT_LT(cosine_lr(1e-5, s, 40), cosine_lr(1e-5, s - 1, 40));
  EXPECT_EQ(code_of([] { cosine_lr(1e-5, 41, 40); }), ErrorCode::kInvalidArgument);
}

TEST(Optimizer, FirstAdamWStepByHand) {
  std::vector<Parameter> params = {{"a", "image_encoder", {1.0, -2.0}}, {"b", "prompt_encoder", {3.0}}};
  AdamW opt(0.9, 0.999, 1e-8, 0.01);
  opt.step(params, {{0.5, -0.25}, {7.0}}, {true, false}, 0.1);
  // Bias-corrected moments reduce the first step to g / |g|.
  EXPECT_NEAR(params[0].values[0], 1.0 * (1 - 0.1 * 0.01) - 0.1 * 0.5 / (0.5 + 1e-8), 1e-15);
  EXPECT_NEAR(params[0].values[1], -2.0 * (1 - 0.1 * 0.01) + 0.1 * 0.25 / (0.25 + 1e-8), 1e-15);
  EXPECT_EQ(params[1].values[0], 3.0);
  // Second step against a second-moment history computed by hand.
  opt.step(params, {{0.5, -0.25}, {7.0}}, {true, false}, 0.1);
  const double m = (0.9 * 0.05 + 0.1 * 0.5) / (1 - 0.81);
  const double v = (0.999 * 0.001 * 0.25 + 0.001 * 0.25) / (1 - 0.999 * 0.999);
  const double first = 1.0 * (1 - 0.001) - 0.1 * 0.5 / (0.5 + 1e-8);
  EXPECT_NEAR(params[0].values[0], first * (1 - 0.001) - 0.1 * m / (std::sqrt(v) + 1e-8), 1e-12);
  EXPECT_EQ(opt.steps(), 2);
}

TEST(ToyModel, ParameterGradientsMatchCentralDifferences) {
  const TrainSample s = toy_sample(6, {16, 16});
  ToyPromptSegmenter model(3);
  const RealMap p = model.forward(s.image, s.prompt_points);
  const auto grads = model.backward(s.image, s.prompt_points, loss_gradient(p, s.gt_mask));
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
      const double numeric = (up - down) / (2 * h);
      const double scale = std::max({std::abs(grads[k][e]), std::abs(numeric), 1e-6});
      EXPECT_LE(std::abs(grads[k][e] - numeric) / scale, 1e-4) << params[k].name << "[" << e << "]";
    }
}

TrainConfig smoke_config() {
  TrainConfig c;
  c.epochs = 5;
  c.input_hw = {32, 32};
  c.seed = 17;
  return c;
}

TEST(Train, SmokeLossFreezeAndSchedule) {
  const fs::path dir = scratch("smoke");
  const Dataset data = toy_dataset(8, 0, {32, 32}, 5, 21);
  ASSERT_EQ(data.train.size(), 8u);
  ToyPromptSegmenter model(1);
  const std::vector<double> prompt_before = model.parameters()[2].values;
  const std::vector<double> decoder_before = model.parameters()[3].values;
  const TrainResult r = train(model, data, smoke_config(), {dir, "smoke", std::nullopt, nullptr});
  ASSERT_EQ(r.epochs.size(), 5u);
  EXPECT_EQ(r.total_steps, 5);
  int increases = 0;
  for (std::size_t e = 1; e < r.epochs.size(); ++e)
    increases += r.epochs[e].mean_loss.total > r.epochs[e - 1].mean_loss.total;
  EXPECT_LE(increases, 1);
  EXPECT_EQ(model.parameters()[2].values, prompt_before);
  EXPECT_NE(model.parameters()[3].values, decoder_before);
  EXPECT_EQ(r.epochs[0].lr, 1e-5);
  EXPECT_EQ(cosine_lr(1e-5, r.total_steps, r.total_steps), 0.0);

  std::ifstream csv(r.metrics_csv);
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "epoch,step,lr,bce,dice,total,val_dice");
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 5);
  // Only the best and the latest checkpoints survive.
  EXPECT_TRUE(fs::exists(r.last_checkpoint));
  EXPECT_TRUE(fs::exists(r.best_checkpoint));
  int ckpts = 0;
  for (const auto& entry : fs::directory_iterator(dir)) ckpts += entry.path().extension() == ".ckpt";
  EXPECT_EQ(ckpts, r.best_checkpoint == r.last_checkpoint ? 1 : 2);
  fs::remove_all(dir);
}

TEST(Train, ValidationDiceAndLargerRateLearns) {
  const fs::path dir = scratch("val");
  const Dataset data = toy_dataset(8, 4, {32, 32}, 5, 8);
  TrainConfig c = smoke_config();
  c.epochs = 30;
  c.batch_size = 4;
  c.lr_init = 0.05;
  ToyPromptSegmenter model(2);
  const TrainResult r = train(model, data, c, {dir, "val", std::nullopt, nullptr});
  ASSERT_TRUE(r.epochs.back().val_dice.has_value());
  EXPECT_LT(r.epochs.back().mean_loss.total, 0.8 * r.epochs.front().mean_loss.total);
  double best = 0;
  for (const auto& e : r.epochs) best = std::max(best, *e.val_dice);
  EXPECT_EQ(*r.epochs[r.best_epoch - 1].val_dice, best);
  fs::remove_all(dir);
}

TEST(Train, ResumeMatchesUninterruptedRun) {
  const Dataset data = toy_dataset(6, 2, {24, 24}, 5, 30);
  TrainConfig c = smoke_config();
  c.input_hw = {24, 24};
  c.epochs = 4;
  c.batch_size = 4;
  c.lr_init = 0.01;
  const fs::path full_dir = scratch("full");
  ToyPromptSegmenter full(5);
  train(full, data, c, {full_dir, "r", std::nullopt, nullptr});

  const fs::path part_dir = scratch("part");
  ToyPromptSegmenter part(5);
  // A shorter first leg would change the schedule, so stop it through the
  // callback instead.
  struct Stop {};
  try {
    train(part, data, c, {part_dir, "r", std::nullopt, [](const EpochMetrics& m) {
                            if (m.epoch == 2) throw Stop{};
                          }});
  } catch (const Stop&) {
  }
  ToyPromptSegmenter resumed(99);
  const TrainResult r = train(resumed, data, c, {part_dir, "r", checkpoint_path(part_dir, "r", 2), nullptr});
  ASSERT_EQ(r.epochs.size(), 2u);
  EXPECT_EQ(r.epochs.front().epoch, 3);
  for (std::size_t k = 0; k < full.parameters().size(); ++k)
    EXPECT_EQ(resumed.parameters()[k].values, full.parameters()[k].values);
  std::ifstream a(full_dir / "r-metrics.csv"), b(part_dir / "r-metrics.csv");
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  EXPECT_EQ(sa.str(), sb.str());
  fs::remove_all(full_dir);
  fs::remove_all(part_dir);
}

class Untagged : public ToyPromptSegmenter {
 public:
  Untagged() { parameters()[1].group = "neck"; }
};

TEST(Train, ConfigurationErrors) {
  const Dataset data = toy_dataset(2, 0, {16, 16}, 5, 1);
  TrainConfig c = smoke_config();
  c.input_hw = {16, 16};
  Untagged bad;
  EXPECT_EQ(code_of([&] { train(bad, data, c, {scratch("bad"), "x", std::nullopt, nullptr}); }),
            ErrorCode::kConfiguration);
  ToyPromptSegmenter ok;
  TrainConfig wrong_size = c;
  wrong_size.input_hw = {32, 32};
  EXPECT_EQ(code_of([&] { train(ok, data, wrong_size, {scratch("bad"), "x", std::nullopt, nullptr}); }),
            ErrorCode::kInvalidArgument);
  fs::remove_all(scratch("bad"));

  nlohmann::json j = to_json(TrainConfig{});
  EXPECT_EQ(train_config_from_json(j).batch_size, 32);
  EXPECT_EQ(train_config_from_json(j).input_hw, (Size{1024, 1024}));
  EXPECT_TRUE(train_config_from_json(j).freeze.prompt_encoder);
  nlohmann::json partial = j;
  partial["freeze"].erase("mask_decoder");
  EXPECT_EQ(code_of([&] { train_config_from_json(partial); }), ErrorCode::kConfiguration);
  nlohmann::json neg = j;
  neg["epochs"] = 0;
  EXPECT_EQ(code_of([&] { train_config_from_json(neg); }), ErrorCode::kConfiguration);
  nlohmann::json typo = j;
  typo["learning_rate"] = 1;
  EXPECT_EQ(code_of([&] { train_config_from_json(typo); }), ErrorCode::kConfiguration);
}

TEST(Manifest, LoadsSplitsAndStoresStatistics) {
  const fs::path dir = scratch("manifest");
  const auto ex = toy_examples(3, {20, 20}, 12);
  std::vector<ManifestEntry> entries;
  for (int i = 0; i < 3; ++i) {
    const std::string stem = "img" + std::to_string(i);
    io::write_frame_png(dir / (stem + ".png"), ex[i].image);
    if (i == 1) {
      io::write_binary_mask_png(dir / (stem + "_mask.png"), ex[i].masks.merged());
    } else {
      io::write_palette_mask_png(dir / (stem + "_mask.png"), ex[i].masks);
    }
    entries.push_back({stem + ".png", stem + "_mask.png",
                       i == 1 ? LabelKind::kBinary : LabelKind::kInstance, i == 2 ? "val" : "train"});
  }
  const fs::path manifest = dir / "data.jsonl";
  write_manifest(manifest, entries);
  const Dataset d = load_dataset(manifest, 0, {20, 20}, 5);
  EXPECT_EQ(d.train.size(), 2u);
  EXPECT_EQ(d.val.size(), 1u);
  ASSERT_TRUE(fs::exists(dir / "data.stats.json"));
  std::vector<Frame> train_frames = {ex[0].image, ex[1].image};
  const ChannelStats expect = compute_channel_stats(train_frames, {20, 20});
  for (int ch = 0; ch < 3; ++ch) EXPECT_NEAR(d.stats.mean[ch], expect.mean[ch], 1e-12);

  // Stored statistics win over recomputation.
  ChannelStats fixed;
  fixed.mean = {0.5, 0.5, 0.5};
  std::ofstream(dir / "data.stats.json") << to_json(fixed).dump();
  EXPECT_EQ(load_dataset(manifest, 0, {20, 20}, 5).stats.mean, fixed.mean);

  std::ofstream(dir / "broken.jsonl") << "{\"image_path\": \"img0.png\"}\n";
  EXPECT_EQ(code_of([&] { read_manifest(dir / "broken.jsonl"); }), ErrorCode::kManifest);
  std::ofstream(dir / "missing.jsonl")
      << "{\"image_path\": \"nope.png\", \"mask_path\": \"img0_mask.png\", \"label_kind\": \"binary\"}\n";
  EXPECT_EQ(code_of([&] { read_manifest(dir / "missing.jsonl"); }), ErrorCode::kManifest);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace tapseg::finetune
