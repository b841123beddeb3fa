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

#include "tapseg/evalbench/metrics.hpp"

#include <algorithm>
#include <set>
#include <string>

#include "tapseg/core/error.hpp"
#include "tapseg/kernels/kernels.hpp"

namespace tapseg::evalbench {

using nlohmann::json;

namespace {

kernels::OverlapCounts counts(const BinaryMask& pred, const BinaryMask& gt) {
  require(pred.size() == gt.size(), ErrorCode::kInvalidArgument,
          "metric: prediction " + std::to_string(pred.height()) + "x" + std::to_string(pred.width()) +
              " vs ground truth " + std::to_string(gt.height()) + "x" + std::to_string(gt.width()));
  return kernels::overlap_counts(pred.bits(), gt.bits());
}

double iou_of(const kernels::OverlapCounts& c) {
  const std::uint64_t uni = c.count_a + c.count_b - c.intersection;
  return uni == 0 ? 1.0 : static_cast<double>(c.intersection) / static_cast<double>(uni);
}

double dice_of(const kernels::OverlapCounts& c) {
  const std::uint64_t sum = c.count_a + c.count_b;
  return sum == 0 ? 1.0 : 2.0 * static_cast<double>(c.intersection) / static_cast<double>(sum);
}

std::string list(const std::vector<std::int64_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + std::to_string(v[i]);
  return s;
}

}  // namespace

double iou(const BinaryMask& pred, const BinaryMask& gt) { return iou_of(counts(pred, gt)); }

double dice(const BinaryMask& pred, const BinaryMask& gt) { return dice_of(counts(pred, gt)); }

std::vector<std::pair<InstanceId, InstanceId>> greedy_match(const InstanceMaskSet& pred,
                                                            const InstanceMaskSet& gt) {
  struct Cand {
    double iou;
    InstanceId gt;
    InstanceId pred;
  };
  std::vector<Cand> cands;
  for (const auto& [gid, gmask] : gt.masks())
    for (const auto& [pid, pmask] : pred.masks()) {
      const auto c = counts(pmask, gmask);
      if (c.intersection > 0) cands.push_back({iou_of(c), gid, pid});
    }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.gt != b.gt) return a.gt < b.gt;
    return a.pred < b.pred;
  });
  std::set<InstanceId> used_gt;
  std::set<InstanceId> used_pred;
  std::vector<std::pair<InstanceId, InstanceId>> out;
  for (const Cand& c : cands) {
    if (used_gt.count(c.gt) || used_pred.count(c.pred)) continue;
    used_gt.insert(c.gt);
    used_pred.insert(c.pred);
    out.emplace_back(c.pred, c.gt);
  }
  return out;
}

EvalResult evaluate_run(std::span<const pipeline::FrameResult> results, const GroundTruth& gt,
                        const EvalOptions& options) {
  std::map<std::int64_t, const pipeline::FrameResult*> by_index;
  for (const auto& r : results) by_index[r.frame_index] = &r;
  std::vector<std::int64_t> no_result;
  std::vector<std::int64_t> no_gt;
  for (const auto& [idx, masks] : gt.frames)
    if (!by_index.count(idx)) no_result.push_back(idx);
  if (!options.allow_unlabeled_frames)
    for (const auto& [idx, r] : by_index)
      if (!gt.frames.count(idx)) no_gt.push_back(idx);
  if (!no_result.empty() || !no_gt.empty()) {
    std::string msg = "evaluation frames misaligned:";
    if (!no_gt.empty()) msg += " missing ground truth for frames [" + list(no_gt) + "]";
    if (!no_result.empty()) msg += " missing results for frames [" + list(no_result) + "]";
    fail(ErrorCode::kAlignment, msg);
  }
  require(!gt.frames.empty(), ErrorCode::kInsufficientData, "evaluation: no ground-truth frames");

  EvalResult out;
  double iou_sum = 0.0;
  double dice_sum = 0.0;
  for (const auto& [idx, truth] : gt.frames) {
    const InstanceMaskSet& pred = by_index.at(idx)->masks;
    const Size size = truth.size();
    const std::size_t first = out.records.size();
    if (gt.kind == GtKind::kBinary || truth.empty()) {
      const BinaryMask p = pred.empty() ? BinaryMask(size.height, size.width) : pred.merged();
      const BinaryMask g = truth.empty() ? BinaryMask(size.height, size.width) : truth.merged();
      const auto c = counts(p, g);
      out.records.push_back({idx, std::nullopt, std::nullopt, iou_of(c), dice_of(c)});
    } else {
      std::map<InstanceId, InstanceId> match;
      for (const auto& [pid, gid] : greedy_match(pred, truth)) match[gid] = pid;
      for (const auto& [gid, gmask] : truth.masks()) {
        MetricRecord rec{idx, gid, std::nullopt, 0.0, 0.0};
        kernels::OverlapCounts c;
        if (auto it = match.find(gid); it != match.end()) {
          rec.pred_instance = it->second;
          c = counts(pred.at(it->second), gmask);
        } else {
          c = counts(BinaryMask(size.height, size.width), gmask);
        }
        rec.iou = iou_of(c);
        rec.dice = dice_of(c);
        out.records.push_back(rec);
      }
    }
    double fi = 0.0;
    double fd = 0.0;
    for (std::size_t i = first; i < out.records.size(); ++i) {
      fi += out.records[i].iou;
      fd += out.records[i].dice;
    }
    const double n = static_cast<double>(out.records.size() - first);
    iou_sum += fi / n;
    dice_sum += fd / n;
  }
  out.summary.frames = gt.frames.size();
  out.summary.records = out.records.size();
  out.summary.mean_iou = iou_sum / static_cast<double>(out.summary.frames);
  out.summary.mean_dice = dice_sum / static_cast<double>(out.summary.frames);
  return out;
}

json to_json(const MetricRecord& r) {
  return {{"frame_index", r.frame_index},
          {"instance_id", r.gt_instance ? json(*r.gt_instance) : json("binary")},
          {"pred_instance", r.pred_instance ? json(*r.pred_instance) : json(nullptr)},
          {"iou", r.iou},
          {"dice", r.dice}};
}

json to_json(const EvalSummary& s) {
  return {{"mean_iou", s.mean_iou}, {"mean_dice", s.mean_dice}, {"frames", s.frames}, {"records", s.records}};
}

}  // namespace tapseg::evalbench
