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
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "tapseg/finetune/data.hpp"
#include "tapseg/finetune/loss.hpp"

namespace tapseg::finetune {

inline constexpr std::string_view kPromptEncoder = "prompt_encoder";
inline constexpr std::string_view kImageEncoder = "image_encoder";
inline constexpr std::string_view kMaskDecoder = "mask_decoder";

struct FreezeMap {
  bool prompt_encoder = true;
  bool image_encoder = false;
  bool mask_decoder = false;

  bool frozen(std::string_view group) const;
};

struct TrainConfig {
  int epochs = 50;
  int batch_size = 32;
  double lr_init = 1e-5;
  Size input_hw{1024, 1024};
  int points_per_prompt = 5;
  FreezeMap freeze;
  std::uint64_t seed = 0;
  bool resample_prompts_each_epoch = true;
  bool augment = true;
  double dice_epsilon = kDiceEpsilon;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double weight_decay = 0.01;

  // Throws kConfiguration naming the offending field.
  void validate() const;
};

// The "freeze" object must name all three submodules.
nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

// lr_init * 0.5 * (1 + cos(pi * step / total_steps)).
double cosine_lr(double lr_init, std::int64_t step, std::int64_t total_steps);

struct Parameter {
  std::string name;
  std::string group;
  std::vector<double> values;
};

// A trainable point-promptable segmenter as seen by the harness. The harness
// owns the optimizer and writes updated values straight into parameters().
class TrainingAdapter {
 public:
  virtual ~TrainingAdapter() = default;

  virtual std::string name() const = 0;
  virtual std::vector<Parameter>& parameters() = 0;

  // Foreground probability at the sample's resolution.
  virtual RealMap forward(const TensorImage& image, std::span<const Point> points) const = 0;

  // Gradient of a scalar objective w.r.t. every parameter given its
  // gradient w.r.t. the forward output; same layout as parameters().
  virtual std::vector<std::vector<double>> backward(const TensorImage& image,
                                                    std::span<const Point> points,
                                                    const RealMap& grad_prob) const = 0;

  virtual void save(std::ostream& out) const = 0;
  virtual void load(std::istream& in) = 0;
};

// Throws kConfiguration unless every parameter carries one of the three
// group tags and each tag is used at least once.
void check_parameter_groups(const std::vector<Parameter>& params);

// AdamW with decoupled weight decay. Frozen parameters are never touched.
class AdamW {
 public:
  AdamW(double beta1, double beta2, double epsilon, double weight_decay);

  void step(std::vector<Parameter>& params, const std::vector<std::vector<double>>& grads,
            const std::vector<bool>& trainable, double lr);

  std::int64_t steps() const { return t_; }

  nlohmann::json state() const;
  void restore(const nlohmann::json& state);

 private:
  double beta1_;
  double beta2_;
  double epsilon_;
  double weight_decay_;
  std::int64_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

struct EpochMetrics {
  int epoch = 0;             // 1-based
  std::int64_t step = 0;     // optimizer steps taken so far
  double lr = 0.0;           // rate used by the epoch's last step
  LossReport mean_loss;      // epoch mean over samples
  std::optional<double> val_dice;
};

struct TrainOptions {
  std::filesystem::path out_dir;
  std::string run_id = "run";
  // Checkpoint to continue from; its epoch is taken from the file name.
  std::optional<std::filesystem::path> resume_from;
  std::function<void(const EpochMetrics&)> on_epoch;
};

struct TrainResult {
  std::vector<EpochMetrics> epochs;
  std::int64_t total_steps = 0;
  std::filesystem::path metrics_csv;
  std::filesystem::path last_checkpoint;
  std::filesystem::path best_checkpoint;
  int best_epoch = 0;
};

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, const std::string& run_id,
                                      int epoch);

// Runs config.epochs epochs of mini-batch AdamW on the train split with a
// cosine schedule over all steps. Writes {run_id}-e{epoch}.ckpt (adapter
// payload) plus an optimizer sidecar after every epoch, appends one CSV row
// per epoch, and keeps the best epoch by validation Dice (by lowest training
// loss when there is no validation split) alongside the latest. Older
// checkpoints are pruned.
TrainResult train(TrainingAdapter& model, const Dataset& data, const TrainConfig& config,
                  const TrainOptions& options);

}  // namespace tapseg::finetune
