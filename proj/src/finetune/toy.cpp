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

#include "tapseg/finetune/toy.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <random>

#include "tapseg/core/error.hpp"
#include "tapseg/sampling/sampling.hpp"

namespace tapseg::finetune {

using nlohmann::json;

namespace {

enum Slot { kW, kB, kPrompt, kDecoder };

constexpr double kSpreadFraction = 0.15;

struct PixelTerms {
  double f;   // image feature
  double e;   // prompt proximity, exp(-d^2 / s^2)
  double q;   // prompt feature
  double p;   // probability
};

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

template <typename Fn>
void for_each_pixel(const std::vector<Parameter>& params, const TensorImage& image,
                    std::span<const Point> points, Fn&& fn) {
  require(!points.empty(), ErrorCode::kInvalidArgument, "toy model: no prompt points");
  const auto& w = params[kW].values;
  const double b = params[kB].values[0];
  const double a = params[kPrompt].values[0];
  const double c0 = params[kPrompt].values[1];
  const auto& u = params[kDecoder].values;
  const double s = kSpreadFraction * std::min(image.height, image.width);
  const double inv_s2 = 1.0 / (s * s);
  for (int r = 0; r < image.height; ++r)
    for (int c = 0; c < image.width; ++c) {
      double d2 = std::numeric_limits<double>::infinity();
      for (const Point& pt : points) {
        const double dx = c + 0.5 - pt.x;
        const double dy = r + 0.5 - pt.y;
        d2 = std::min(d2, dx * dx + dy * dy);
      }
      PixelTerms t{};
      t.f = b;
      for (int ch = 0; ch < 3; ++ch) t.f += w[ch] * image.at(r, c, ch);
      t.e = std::exp(-d2 * inv_s2);
      t.q = a * t.e + c0;
      t.p = sigmoid(u[0] * t.f + u[1] * t.q + u[2] * t.f * t.q + u[3]);
      fn(static_cast<std::size_t>(r) * image.width + c, r, c, t);
    }
}

}  // namespace

ToyPromptSegmenter::ToyPromptSegmenter(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> jitter(0.0, 0.05);
  params_ = {
      {"image_encoder.weight", std::string(kImageEncoder), {0.3 + jitter(rng), 0.3 + jitter(rng), 0.3 + jitter(rng)}},
      {"image_encoder.bias", std::string(kImageEncoder), {jitter(rng)}},
      {"prompt_encoder.gauss", std::string(kPromptEncoder), {2.0 + jitter(rng), jitter(rng)}},
      {"mask_decoder.weight", std::string(kMaskDecoder),
       {0.5 + jitter(rng), 1.0 + jitter(rng), jitter(rng), -1.0 + jitter(rng)}},
  };
}

RealMap ToyPromptSegmenter::forward(const TensorImage& image, std::span<const Point> points) const {
  RealMap out{image.height, image.width,
              std::vector<double>(static_cast<std::size_t>(image.height) * image.width)};
  for_each_pixel(params_, image, points,
                 [&](std::size_t i, int, int, const PixelTerms& t) { out.data[i] = t.p; });
  return out;
}

std::vector<std::vector<double>> ToyPromptSegmenter::backward(const TensorImage& image,
                                                              std::span<const Point> points,
                                                              const RealMap& grad_prob) const {
  require(grad_prob.size() == image.size(), ErrorCode::kInvalidArgument,
          "toy model: gradient size differs from image");
  std::vector<std::vector<double>> g;
  for (const Parameter& p : params_) g.emplace_back(p.values.size(), 0.0);
  const auto& u = params_[kDecoder].values;
  for_each_pixel(params_, image, points, [&](std::size_t i, int r, int c, const PixelTerms& t) {
    const double dz = grad_prob.data[i] * t.p * (1.0 - t.p);
    g[kDecoder][0] += dz * t.f;
    g[kDecoder][1] += dz * t.q;
    g[kDecoder][2] += dz * t.f * t.q;
    g[kDecoder][3] += dz;
    const double df = dz * (u[0] + u[2] * t.q);
    const double dq = dz * (u[1] + u[2] * t.f);
    for (int ch = 0; ch < 3; ++ch) g[kW][ch] += df * image.at(r, c, ch);
    g[kB][0] += df;
    g[kPrompt][0] += dq * t.e;
    g[kPrompt][1] += dq;
  });
  return g;
}

void ToyPromptSegmenter::save(std::ostream& out) const {
  json params = json::object();
  for (const Parameter& p : params_) params[p.name] = p.values;
  out << json{{"model", name()}, {"params", params}}.dump() << '\n';
}

void ToyPromptSegmenter::load(std::istream& in) {
  try {
    const json j = json::parse(in);
    require(j.at("model").get<std::string>() == name(), ErrorCode::kDecode,
            "toy checkpoint: written by another model");
    for (Parameter& p : params_) {
      auto values = j.at("params").at(p.name).get<std::vector<double>>();
      require(values.size() == p.values.size(), ErrorCode::kDecode,
              "toy checkpoint: wrong size for " + p.name);
      p.values = std::move(values);
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kDecode, std::string("toy checkpoint: ") + e.what());
  }
}

std::vector<ToyExample> toy_examples(int count, Size hw, std::uint64_t seed) {
  require(count >= 0 && hw.height >= 8 && hw.width >= 8, ErrorCode::kInvalidArgument,
          "toy_examples: need a non-negative count and at least 8x8 frames");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(40.0, 8.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double side = std::min(hw.height, hw.width);
  std::vector<ToyExample> out;
  for (int i = 0; i < count; ++i) {
    const double radius = side * (0.12 + 0.08 * unit(rng));
    const double cx = radius + (hw.width - 2 * radius) * unit(rng);
    const double cy = radius + (hw.height - 2 * radius) * unit(rng);
    const double tint = 170.0 + 60.0 * unit(rng);
    std::vector<std::uint8_t> rgb(static_cast<std::size_t>(hw.height) * hw.width * 3);
    BinaryMask mask(hw.height, hw.width);
    for (int r = 0; r < hw.height; ++r)
      for (int c = 0; c < hw.width; ++c) {
        const double dx = c + 0.5 - cx;
        const double dy = r + 0.5 - cy;
        const bool inside = dx * dx + dy * dy <= radius * radius;
        mask.set(r, c, inside);
        for (int ch = 0; ch < 3; ++ch) {
          const double base = inside ? tint - 30.0 * ch : 0.0;
          const double v = std::clamp(base + noise(rng), 0.0, 255.0);
          rgb[(static_cast<std::size_t>(r) * hw.width + c) * 3 + ch] = static_cast<std::uint8_t>(v);
        }
      }
    ToyExample ex{Frame(i, 0.0, hw.height, hw.width, std::move(rgb)), InstanceMaskSet(i, hw)};
    ex.masks.insert(1, std::move(mask));
    out.push_back(std::move(ex));
  }
  return out;
}

Dataset toy_dataset(int train_count, int val_count, Size hw, int points_per_prompt,
                    std::uint64_t seed) {
  require(train_count >= 1 && val_count >= 0, ErrorCode::kInvalidArgument,
          "toy_dataset: need at least one training example");
  const std::vector<ToyExample> examples = toy_examples(train_count + val_count, hw, seed);
  std::vector<Frame> train_frames;
  for (int i = 0; i < train_count; ++i) train_frames.push_back(examples[i].image);
  Dataset data;
  data.stats = compute_channel_stats(train_frames, hw);
  const SampleParams params{hw, points_per_prompt, data.stats};
  for (int i = 0; i < train_count + val_count; ++i) {
    SampleSet set = make_samples(examples[i].image, examples[i].masks, LabelKind::kInstance,
                                 sampling::derive_seed(seed, static_cast<std::uint64_t>(i)), params);
    auto& dst = i < train_count ? data.train : data.val;
    for (auto& s : set.samples) dst.push_back(std::move(s));
  }
  return data;
}

}  // namespace tapseg::finetune
