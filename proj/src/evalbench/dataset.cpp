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

#include "tapseg/evalbench/dataset.hpp"

#include <map>
#include <regex>

#include "tapseg/core/error.hpp"
#include "tapseg/io/image_io.hpp"

namespace tapseg::evalbench {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(MaskEncoding e) { return e == MaskEncoding::kPalette ? "palette" : "binary"; }

MaskEncoding mask_encoding_from_string(std::string_view name) {
  if (name == "palette") return MaskEncoding::kPalette;
  if (name == "binary") return MaskEncoding::kBinary;
  fail(ErrorCode::kConfiguration, "unknown mask encoding '" + std::string(name) + "'");
}

namespace {

std::map<std::int64_t, fs::path> indexed_pngs(const fs::path& dir) {
  require(fs::is_directory(dir), ErrorCode::kIo, "not a directory: " + dir.string());
  static const std::regex kDigits(R"((\d+)\D*\.png$)", std::regex::icase);
  std::map<std::int64_t, fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    std::smatch m;
    if (!std::regex_search(name, m, kDigits)) continue;
    const std::int64_t idx = std::stoll(m[1].str());
    const auto [it, fresh] = out.emplace(idx, entry.path());
    if (!fresh)
      fail(ErrorCode::kManifest, "two files for index " + std::to_string(idx) + " in " + dir.string() +
                                     ": " + it->second.filename().string() + ", " + name);
  }
  return out;
}

}  // namespace

DatasetHandle ingest_dataset(const fs::path& root, const DatasetLayout& layout) {
  require(fs::is_directory(root), ErrorCode::kIo, "dataset root not found: " + root.string());
  const auto frames = indexed_pngs(root / layout.frames_dir);
  const auto masks = indexed_pngs(root / layout.masks_dir);
  std::vector<std::string> orphans;
  for (const auto& [idx, path] : frames)
    if (!masks.count(idx)) orphans.push_back("frame " + std::to_string(idx) + " without mask: " + path.string());
  for (const auto& [idx, path] : masks)
    if (!frames.count(idx)) orphans.push_back("mask " + std::to_string(idx) + " without frame: " + path.string());
  if (!orphans.empty()) {
    std::string msg = "dataset " + root.string() + " is misaligned:";
    for (const auto& o : orphans) msg += "\n  " + o;
    fail(ErrorCode::kManifest, msg);
  }
  require(!frames.empty(), ErrorCode::kManifest, "dataset " + root.string() + " has no frames");
  DatasetHandle d{root, layout, {}};
  for (const auto& [idx, path] : frames) d.pairs.push_back({idx, path, masks.at(idx)});
  return d;
}

InstanceMaskSet DatasetHandle::load_mask(std::size_t i) const {
  const FramePair& p = pairs.at(i);
  if (layout.mask_encoding == MaskEncoding::kPalette) return io::read_palette_mask_png(p.mask, p.frame_index);
  BinaryMask m = io::read_binary_mask_png(p.mask);
  InstanceMaskSet set(p.frame_index, m.size());
  if (!m.none()) set.insert(1, std::move(m));
  return set;
}

GroundTruth DatasetHandle::load_ground_truth() const {
  GroundTruth gt;
  gt.kind = layout.mask_encoding == MaskEncoding::kPalette ? GtKind::kInstance : GtKind::kBinary;
  for (std::size_t i = 0; i < pairs.size(); ++i) gt.frames[pairs[i].frame_index] = load_mask(i);
  return gt;
}

json to_json(const DatasetHandle& d) {
  json pairs = json::array();
  for (const auto& p : d.pairs)
    pairs.push_back({{"frame_index", p.frame_index}, {"frame", p.frame.string()}, {"mask", p.mask.string()}});
  return {{"root", d.root.string()},
          {"layout",
           {{"frames_dir", d.layout.frames_dir},
            {"masks_dir", d.layout.masks_dir},
            {"mask_encoding", to_string(d.layout.mask_encoding)}}},
          {"pairs", pairs}};
}

}  // namespace tapseg::evalbench
