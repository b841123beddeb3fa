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

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "tapseg/core/types.hpp"
#include "tapseg/pipeline/pipeline.hpp"

namespace tapseg::evalbench {

// |P n G| / |P u G|. Both empty gives 1, exactly one empty gives 0.
// Throws kInvalidArgument when the dimensions differ.
double iou(const BinaryMask& pred, const BinaryMask& gt);

// 2|P n G| / (|P| + |G|), same conventions as iou().
double dice(const BinaryMask& pred, const BinaryMask& gt);

enum class GtKind { kInstance, kBinary };

// Ground truth keyed by frame index. Binary ground truth is stored as a
// single instance per frame.
struct GroundTruth {
  GtKind kind = GtKind::kInstance;
  std::map<std::int64_t, InstanceMaskSet> frames;
};

struct MetricRecord {
  std::int64_t frame_index = 0;
  std::optional<InstanceId> gt_instance;    // empty for binary scoring
  std::optional<InstanceId> pred_instance;  // empty when unmatched or binary
  double iou = 0.0;
  double dice = 0.0;
};

struct EvalSummary {
  double mean_iou = 0.0;
  double mean_dice = 0.0;
  std::size_t frames = 0;
  std::size_t records = 0;
};

struct EvalResult {
  std::vector<MetricRecord> records;
  EvalSummary summary;
};

struct EvalOptions {
  // Result frames without ground truth are skipped instead of rejected.
  bool allow_unlabeled_frames = false;
};

// Pairs (pred id, gt id) chosen by repeatedly taking the highest remaining
// IoU; ties go to the lower gt id, then the lower pred id. Pairs with zero
// overlap are never formed.
std::vector<std::pair<InstanceId, InstanceId>> greedy_match(const InstanceMaskSet& pred,
                                                            const InstanceMaskSet& gt);

// Scores every ground-truth frame against the result with the same index.
// Instance ground truth is matched greedily and every gt instance yields a
// record (unmatched ones score against an empty mask); binary ground truth
// compares the union of predicted instances with the gt union. A frame's
// score is the mean of its records, the summary the mean over frames.
// Throws kAlignment listing the frame indices present on only one side.
EvalResult evaluate_run(std::span<const pipeline::FrameResult> results, const GroundTruth& gt,
                        const EvalOptions& options = {});

nlohmann::json to_json(const MetricRecord& r);
nlohmann::json to_json(const EvalSummary& s);

}  // namespace tapseg::evalbench
