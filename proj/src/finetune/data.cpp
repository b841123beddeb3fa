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

#include "tapseg/finetune/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "tapseg/core/error.hpp"
#include "tapseg/core/image.hpp"
#include "tapseg/io/image_io.hpp"
#include "tapseg/sampling/sampling.hpp"

namespace tapseg::finetune {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(LabelKind kind) {
  return kind == LabelKind::kInstance ? "instance" : "binary";
}

LabelKind label_kind_from_string(std::string_view name) {
  if (name == "instance") return LabelKind::kInstance;
  if (name == "binary") return LabelKind::kBinary;
  fail(ErrorCode::kInvalidArgument, "unknown label kind '" + std::string(name) + "'");
}

json to_json(const ChannelStats& s) {
  return {{"mean", s.mean}, {"std", s.stddev}};
}

ChannelStats channel_stats_from_json(const json& j) {
  ChannelStats s;
  try {
    s.mean = j.at("mean").get<std::array<double, 3>>();
    s.stddev = j.at("std").get<std::array<double, 3>>();
  } catch (const json::exception& e) {
    fail(ErrorCode::kDecode, std::string("channel stats: ") + e.what());
  }
  for (double d : s.stddev)
    require(d > 0.0 && std::isfinite(d), ErrorCode::kDecode, "channel stats: std must be positive");
  return s;
}

TensorImage min_max_normalize(const Frame& frame) {
  TensorImage out{frame.height(), frame.width(), {}};
  const auto rgb = frame.rgb();
  out.data.resize(rgb.size());
  for (int ch = 0; ch < 3; ++ch) {
    std::uint8_t lo = 255;
    std::uint8_t hi = 0;
    for (std::size_t i = ch; i < rgb.size(); i += 3) {
      lo = std::min(lo, rgb[i]);
      hi = std::max(hi, rgb[i]);
    }
    const float range = static_cast<float>(hi) - static_cast<float>(lo);
    for (std::size_t i = ch; i < rgb.size(); i += 3)
      out.data[i] = hi == lo ? 0.0f : (static_cast<float>(rgb[i]) - lo) / range;
  }
  return out;
}

void standardize(TensorImage& image, const ChannelStats& stats) {
  for (std::size_t i = 0; i < image.data.size(); ++i) {
    const int ch = static_cast<int>(i % 3);
    image.data[i] = static_cast<float>((image.data[i] - stats.mean[ch]) / stats.stddev[ch]);
  }
}

ChannelStats compute_channel_stats(std::span<const Frame> frames, Size hw) {
  require(!frames.empty(), ErrorCode::kInsufficientData, "channel stats need at least one image");
  std::array<double, 3> sum{};
  std::array<double, 3> sq{};
  std::size_t n = 0;
  for (const Frame& f : frames) {
    const TensorImage t = min_max_normalize(resize_frame(f, hw));
    for (std::size_t i = 0; i < t.data.size(); ++i) {
      sum[i % 3] += t.data[i];
      sq[i % 3] += static_cast<double>(t.data[i]) * t.data[i];
    }
    n += t.data.size() / 3;
  }
  ChannelStats s;
  for (int ch = 0; ch < 3; ++ch) {
    s.mean[ch] = sum[ch] / n;
    const double var = std::max(0.0, sq[ch] / n - s.mean[ch] * s.mean[ch]);
    s.stddev[ch] = var > 1e-12 ? std::sqrt(var) : 1.0;
  }
  return s;
}

namespace {

void check_params(const SampleParams& p) {
  require(p.input_hw.height > 0 && p.input_hw.width > 0, ErrorCode::kInvalidArgument,
          "make_samples: input size must be positive");
  require(p.points_per_prompt >= 1, ErrorCode::kInvalidArgument,
          "make_samples: points_per_prompt must be positive");
}

TensorImage prepare_image(const Frame& image, const SampleParams& p) {
  TensorImage t = min_max_normalize(resize_frame(image, p.input_hw));
  standardize(t, p.stats);
  return t;
}

void add_region(SampleSet& out, const TensorImage& image, InstanceId id, const BinaryMask& mask,
                std::uint64_t seed, const SampleParams& p) {
  if (mask.none()) {
    out.skipped.push_back({id, "empty region"});
    return;
  }
  BinaryMask resized = resize_mask_nearest(mask, p.input_hw);
  if (resized.none()) {
    out.skipped.push_back({id, "region vanished after resize"});
    return;
  }
  TrainSample s;
  s.image = image;
  s.instance_id = id;
  s.prompt_points = sampling::sample_random(resized, p.points_per_prompt,
                                            sampling::derive_seed(seed, static_cast<std::uint64_t>(id)));
  s.gt_mask = std::move(resized);
  out.samples.push_back(std::move(s));
}

}  // namespace

SampleSet make_samples(const Frame& image, const InstanceMaskSet& masks, LabelKind kind,
                       std::uint64_t seed, const SampleParams& params) {
  check_params(params);
  require(!masks.empty(), ErrorCode::kInvalidArgument, "make_samples: no labels");
  require(masks.size() == image.size(), ErrorCode::kInvalidArgument,
          "make_samples: label size differs from image size");
  SampleSet out;
  const TensorImage t = prepare_image(image, params);
  if (kind == LabelKind::kBinary) {
    add_region(out, t, 0, masks.merged(), seed, params);
  } else {
    for (const auto& [id, mask] : masks.masks()) add_region(out, t, id, mask, seed, params);
  }
  return out;
}

SampleSet make_samples(const Frame& image, const BinaryMask& mask, std::uint64_t seed,
                       const SampleParams& params) {
  check_params(params);
  require(mask.size() == image.size(), ErrorCode::kInvalidArgument,
          "make_samples: label size differs from image size");
  SampleSet out;
  add_region(out, prepare_image(image, params), 0, mask, seed, params);
  return out;
}

void resample_prompts(TrainSample& sample, int count, std::uint64_t seed) {
  sample.prompt_points = sampling::sample_random(sample.gt_mask, count, seed);
}

TrainSample flip(const TrainSample& sample, bool left_right, bool up_down) {
  if (!left_right && !up_down) return sample;
  const int h = sample.image.height;
  const int w = sample.image.width;
  TrainSample out = sample;
  for (int r = 0; r < h; ++r) {
    const int sr = up_down ? h - 1 - r : r;
    for (int c = 0; c < w; ++c) {
      const int sc = left_right ? w - 1 - c : c;
      for (int ch = 0; ch < 3; ++ch)
        out.image.data[(static_cast<std::size_t>(r) * w + c) * 3 + ch] = sample.image.at(sr, sc, ch);
      out.gt_mask.set(r, c, sample.gt_mask.at(sr, sc));
    }
  }
  for (Point& p : out.prompt_points) {
    if (left_right) p.x = w - p.x;
    if (up_down) p.y = h - p.y;
  }
  return out;
}

TrainSample augment(const TrainSample& sample, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  const bool lr = coin(rng);
  const bool ud = coin(rng);
  return flip(sample, lr, ud);
}

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot open manifest " + path.string());
  const fs::path base = path.parent_path();
  std::vector<ManifestEntry> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno) + ": ";
    ManifestEntry e;
    try {
      const json j = json::parse(line);
      e.image_path = j.at("image_path").get<std::string>();
      e.mask_path = j.at("mask_path").get<std::string>();
      e.label_kind = label_kind_from_string(j.at("label_kind").get<std::string>());
      e.split = j.value("split", std::string("train"));
    } catch (const json::exception& ex) {
      fail(ErrorCode::kManifest, where + ex.what());
    } catch (const Error& ex) {
      fail(ErrorCode::kManifest, where + ex.what());
    }
    require(e.split == "train" || e.split == "val", ErrorCode::kManifest,
            where + "split must be 'train' or 'val'");
    if (e.image_path.is_relative()) e.image_path = base / e.image_path;
    if (e.mask_path.is_relative()) e.mask_path = base / e.mask_path;
    for (const fs::path& p : {e.image_path, e.mask_path})
      require(fs::exists(p), ErrorCode::kManifest, where + "missing file " + p.string());
    out.push_back(std::move(e));
  }
  require(!out.empty(), ErrorCode::kManifest, path.string() + ": no entries");
  return out;
}

void write_manifest(const fs::path& path, std::span<const ManifestEntry> entries) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::kIo, "cannot write manifest " + path.string());
  for (const auto& e : entries) {
    out << json{{"image_path", e.image_path.string()},
                {"mask_path", e.mask_path.string()},
                {"label_kind", to_string(e.label_kind)},
                {"split", e.split}}
               .dump()
        << '\n';
  }
}

fs::path stats_path_for(const fs::path& manifest) {
  fs::path p = manifest;
  p.replace_extension(".stats.json");
  return p;
}

Dataset load_dataset(const fs::path& manifest, std::uint64_t seed, Size input_hw,
                     int points_per_prompt) {
  const std::vector<ManifestEntry> entries = read_manifest(manifest);
  std::vector<Frame> frames;
  frames.reserve(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i)
    frames.push_back(io::read_frame_png(entries[i].image_path, static_cast<std::int64_t>(i), 0.0));

  Dataset data;
  const fs::path stats_file = stats_path_for(manifest);
  if (fs::exists(stats_file)) {
    std::ifstream in(stats_file);
    try {
      data.stats = channel_stats_from_json(json::parse(in));
    } catch (const json::exception& e) {
      fail(ErrorCode::kDecode, stats_file.string() + ": " + e.what());
    }
  } else {
    std::vector<Frame> train_frames;
    for (std::size_t i = 0; i < entries.size(); ++i)
      if (entries[i].split == "train") train_frames.push_back(frames[i]);
    data.stats = compute_channel_stats(train_frames, input_hw);
    std::ofstream out(stats_file);
    require(out.good(), ErrorCode::kIo, "cannot write " + stats_file.string());
    out << to_json(data.stats).dump(2) << '\n';
  }

  const SampleParams params{input_hw, points_per_prompt, data.stats};
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const ManifestEntry& e = entries[i];
    const std::uint64_t s = sampling::derive_seed(seed, i);
    SampleSet set;
    if (e.label_kind == LabelKind::kInstance) {
      const InstanceMaskSet masks = io::read_palette_mask_png(e.mask_path, 0);
      if (masks.empty()) {
        data.skipped.push_back({0, e.mask_path.string() + ": empty region"});
        continue;
      }
      set = make_samples(frames[i], masks, e.label_kind, s, params);
    } else {
      set = make_samples(frames[i], io::read_binary_mask_png(e.mask_path), s, params);
    }
    auto& dst = e.split == "val" ? data.val : data.train;
    for (auto& sample : set.samples) dst.push_back(std::move(sample));
    for (auto& skip : set.skipped) {
      skip.reason = e.mask_path.string() + ": " + skip.reason;
      data.skipped.push_back(std::move(skip));
    }
  }
  require(!data.train.empty(), ErrorCode::kInsufficientData,
          manifest.string() + ": no usable training regions");
  return data;
}

}  // namespace tapseg::finetune
