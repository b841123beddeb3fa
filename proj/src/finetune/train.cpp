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

#include "tapseg/finetune/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <regex>
#include <set>

#include "tapseg/core/error.hpp"
#include "tapseg/sampling/sampling.hpp"

namespace tapseg::finetune {

namespace fs = std::filesystem;
using nlohmann::json;

bool FreezeMap::frozen(std::string_view group) const {
  if (group == kPromptEncoder) return prompt_encoder;
  if (group == kImageEncoder) return image_encoder;
  if (group == kMaskDecoder) return mask_decoder;
  fail(ErrorCode::kConfiguration, "unknown parameter group '" + std::string(group) + "'");
}

void TrainConfig::validate() const {
  auto check = [](bool ok, const std::string& field, const std::string& what) {
    require(ok, ErrorCode::kConfiguration, "train." + field + " " + what);
  };
  check(epochs > 0, "epochs", "must be positive");
  check(batch_size > 0, "batch_size", "must be positive");
  check(lr_init > 0.0 && std::isfinite(lr_init), "lr_init", "must be positive");
  check(input_hw.height > 0 && input_hw.width > 0, "input_hw", "must be positive");
  check(points_per_prompt >= 1, "points_per_prompt", "must be positive");
  check(dice_epsilon > 0.0, "dice_epsilon", "must be positive");
  check(beta1 >= 0.0 && beta1 < 1.0, "beta1", "must lie in [0, 1)");
  check(beta2 >= 0.0 && beta2 < 1.0, "beta2", "must lie in [0, 1)");
  check(adam_epsilon > 0.0, "adam_epsilon", "must be positive");
  check(weight_decay >= 0.0, "weight_decay", "must be non-negative");
}

json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"lr_init", c.lr_init},
          {"input_hw", {c.input_hw.height, c.input_hw.width}},
          {"points_per_prompt", c.points_per_prompt},
          {"freeze",
           {{std::string(kPromptEncoder), c.freeze.prompt_encoder},
            {std::string(kImageEncoder), c.freeze.image_encoder},
            {std::string(kMaskDecoder), c.freeze.mask_decoder}}},
          {"seed", c.seed},
          {"resample_prompts_each_epoch", c.resample_prompts_each_epoch},
          {"augment", c.augment},
          {"dice_epsilon", c.dice_epsilon},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"adam_epsilon", c.adam_epsilon},
          {"weight_decay", c.weight_decay}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  std::string field = "train";
  try {
    require(j.is_object(), ErrorCode::kConfiguration, "train section must be a JSON object");
    static const std::set<std::string> known = {
        "epochs", "batch_size", "lr_init", "input_hw", "points_per_prompt", "freeze", "seed",
        "resample_prompts_each_epoch", "augment", "dice_epsilon", "beta1", "beta2",
        "adam_epsilon", "weight_decay"};
    for (const auto& [key, value] : j.items())
      require(known.count(key) != 0, ErrorCode::kConfiguration, "train." + key + ": unknown field");
    auto get = [&](const char* key, auto& dst) {
      field = std::string("train.") + key;
      if (j.contains(key)) dst = j.at(key).get<std::remove_reference_t<decltype(dst)>>();
    };
    get("epochs", c.epochs);
    get("batch_size", c.batch_size);
    get("lr_init", c.lr_init);
    get("points_per_prompt", c.points_per_prompt);
    get("seed", c.seed);
    get("resample_prompts_each_epoch", c.resample_prompts_each_epoch);
    get("augment", c.augment);
    get("dice_epsilon", c.dice_epsilon);
    get("beta1", c.beta1);
    get("beta2", c.beta2);
    get("adam_epsilon", c.adam_epsilon);
    get("weight_decay", c.weight_decay);
    field = "train.input_hw";
    if (j.contains("input_hw")) {
      const auto hw = j.at("input_hw").get<std::vector<int>>();
      require(hw.size() == 2, ErrorCode::kConfiguration, "train.input_hw: need [height, width]");
      c.input_hw = {hw[0], hw[1]};
    }
    field = "train.freeze";
    if (j.contains("freeze")) {
      const json& f = j.at("freeze");
      require(f.is_object(), ErrorCode::kConfiguration, "train.freeze must be an object");
      for (const auto& [key, value] : f.items())
        require(key == kPromptEncoder || key == kImageEncoder || key == kMaskDecoder,
                ErrorCode::kConfiguration, "train.freeze: unknown submodule '" + key + "'");
      for (auto group : {kPromptEncoder, kImageEncoder, kMaskDecoder})
        require(f.contains(std::string(group)), ErrorCode::kConfiguration,
                "train.freeze: missing submodule '" + std::string(group) + "'");
      c.freeze.prompt_encoder = f.at(std::string(kPromptEncoder)).get<bool>();
      c.freeze.image_encoder = f.at(std::string(kImageEncoder)).get<bool>();
      c.freeze.mask_decoder = f.at(std::string(kMaskDecoder)).get<bool>();
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfiguration) throw;
    fail(ErrorCode::kConfiguration, field + ": " + e.what());
  } catch (const std::exception& e) {
    fail(ErrorCode::kConfiguration, field + ": " + e.what());
  }
  c.validate();
  return c;
}

double cosine_lr(double lr_init, std::int64_t step, std::int64_t total_steps) {
  require(total_steps > 0, ErrorCode::kInvalidArgument, "cosine_lr: total_steps must be positive");
  require(step >= 0 && step <= total_steps, ErrorCode::kInvalidArgument,
          "cosine_lr: step outside [0, total_steps]");
  if (step == total_steps) return 0.0;
  const double phase = std::numbers::pi * static_cast<double>(step) / static_cast<double>(total_steps);
  return lr_init * 0.5 * (1.0 + std::cos(phase));
}

void check_parameter_groups(const std::vector<Parameter>& params) {
  require(!params.empty(), ErrorCode::kConfiguration, "model exposes no parameters");
  std::set<std::string> seen;
  for (const Parameter& p : params) {
    require(p.group == kPromptEncoder || p.group == kImageEncoder || p.group == kMaskDecoder,
            ErrorCode::kConfiguration,
            "parameter '" + p.name + "' has unknown group tag '" + p.group + "'");
    seen.insert(p.group);
  }
  for (auto group : {kPromptEncoder, kImageEncoder, kMaskDecoder})
    require(seen.count(std::string(group)) != 0, ErrorCode::kConfiguration,
            "model has no parameters tagged '" + std::string(group) + "'");
}

AdamW::AdamW(double beta1, double beta2, double epsilon, double weight_decay)
    : beta1_(beta1), beta2_(beta2), epsilon_(epsilon), weight_decay_(weight_decay) {}

void AdamW::step(std::vector<Parameter>& params, const std::vector<std::vector<double>>& grads,
                 const std::vector<bool>& trainable, double lr) {
  require(grads.size() == params.size() && trainable.size() == params.size(),
          ErrorCode::kInvalidArgument, "AdamW: gradient layout differs from parameters");
  if (m_.empty()) {
    for (const Parameter& p : params) {
      m_.emplace_back(p.values.size(), 0.0);
      v_.emplace_back(p.values.size(), 0.0);
    }
  }
  require(m_.size() == params.size(), ErrorCode::kInvalidArgument,
          "AdamW: parameter count changed between steps");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!trainable[i]) continue;
    auto& theta = params[i].values;
    require(grads[i].size() == theta.size() && m_[i].size() == theta.size(),
            ErrorCode::kInvalidArgument, "AdamW: size mismatch for '" + params[i].name + "'");
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const double g = grads[i][k];
      m_[i][k] = beta1_ * m_[i][k] + (1.0 - beta1_) * g;
      v_[i][k] = beta2_ * v_[i][k] + (1.0 - beta2_) * g * g;
      const double m_hat = m_[i][k] / c1;
      const double v_hat = v_[i][k] / c2;
      theta[k] *= 1.0 - lr * weight_decay_;
      theta[k] -= lr * m_hat / (std::sqrt(v_hat) + epsilon_);
    }
  }
}

json AdamW::state() const { return {{"t", t_}, {"m", m_}, {"v", v_}}; }

void AdamW::restore(const json& state) {
  try {
    t_ = state.at("t").get<std::int64_t>();
    m_ = state.at("m").get<std::vector<std::vector<double>>>();
    v_ = state.at("v").get<std::vector<std::vector<double>>>();
  } catch (const json::exception& e) {
    fail(ErrorCode::kDecode, std::string("optimizer state: ") + e.what());
  }
}

fs::path checkpoint_path(const fs::path& dir, const std::string& run_id, int epoch) {
  return dir / (run_id + "-e" + std::to_string(epoch) + ".ckpt");
}

namespace {

fs::path sidecar_path(const fs::path& ckpt) { return fs::path(ckpt.string() + ".opt.json"); }

void write_atomic(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  const fs::path tmp = fs::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorCode::kIo, "cannot write " + tmp.string());
    body(out);
    out.flush();
    require(out.good(), ErrorCode::kIo, "write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

void remove_checkpoint(const fs::path& ckpt) {
  std::error_code ec;
  fs::remove(ckpt, ec);
  fs::remove(sidecar_path(ckpt), ec);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

struct Progress {
  int epoch = 0;
  std::int64_t step = 0;
  int best_epoch = 0;
  double best_score = -std::numeric_limits<double>::infinity();
};

}  // namespace

TrainResult train(TrainingAdapter& model, const Dataset& data, const TrainConfig& config,
                  const TrainOptions& options) {
  config.validate();
  std::vector<Parameter>& params = model.parameters();
  check_parameter_groups(params);
  require(!data.train.empty(), ErrorCode::kInsufficientData, "train: empty training split");
  for (const auto* split : {&data.train, &data.val})
    for (const TrainSample& s : *split)
      require(s.image.size() == config.input_hw && s.gt_mask.size() == config.input_hw,
              ErrorCode::kInvalidArgument, "train: sample size differs from input_hw");
  require(!options.out_dir.empty(), ErrorCode::kInvalidArgument, "train: out_dir is required");
  fs::create_directories(options.out_dir);

  std::vector<bool> trainable;
  for (const Parameter& p : params) trainable.push_back(!config.freeze.frozen(p.group));

  const std::int64_t n = static_cast<std::int64_t>(data.train.size());
  const std::int64_t steps_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  TrainResult result;
  result.total_steps = steps_per_epoch * config.epochs;
  result.metrics_csv = options.out_dir / (options.run_id + "-metrics.csv");

  AdamW opt(config.beta1, config.beta2, config.adam_epsilon, config.weight_decay);
  Progress progress;
  if (options.resume_from) {
    const fs::path& ckpt = *options.resume_from;
    static const std::regex kName(R"(-e(\d+)\.ckpt$)");
    std::smatch m;
    const std::string name = ckpt.filename().string();
    require(std::regex_search(name, m, kName), ErrorCode::kInvalidArgument,
            "resume: not a checkpoint name: " + name);
    std::ifstream in(ckpt, std::ios::binary);
    require(in.good(), ErrorCode::kIo, "resume: cannot open " + ckpt.string());
    model.load(in);
    std::ifstream side(sidecar_path(ckpt));
    require(side.good(), ErrorCode::kIo, "resume: missing optimizer state for " + ckpt.string());
    try {
      const json s = json::parse(side);
      opt.restore(s.at("optimizer"));
      progress.epoch = s.at("epoch").get<int>();
      progress.step = s.at("step").get<std::int64_t>();
      progress.best_epoch = s.at("best_epoch").get<int>();
      progress.best_score = s.at("best_score").get<double>();
    } catch (const json::exception& e) {
      fail(ErrorCode::kDecode, "resume: " + std::string(e.what()));
    }
    require(progress.epoch == std::stoi(m[1].str()), ErrorCode::kDecode,
            "resume: optimizer state belongs to another epoch");
    result.best_epoch = progress.best_epoch;
    result.best_checkpoint = checkpoint_path(options.out_dir, options.run_id, progress.best_epoch);
    result.last_checkpoint = ckpt;
  } else {
    std::ofstream csv(result.metrics_csv, std::ios::trunc);
    require(csv.good(), ErrorCode::kIo, "cannot write " + result.metrics_csv.string());
    csv << "epoch,step,lr,bce,dice,total,val_dice\n";
  }

  std::vector<std::size_t> order(data.train.size());
  for (int epoch = progress.epoch + 1; epoch <= config.epochs; ++epoch) {
    const std::uint64_t epoch_seed = sampling::derive_seed(config.seed, static_cast<std::uint64_t>(epoch));
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(epoch_seed);
    std::shuffle(order.begin(), order.end(), rng);

    LossReport sum;
    double last_lr = 0.0;
    for (std::int64_t b = 0; b < steps_per_epoch; ++b) {
      const std::size_t begin = static_cast<std::size_t>(b * config.batch_size);
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      const double scale = 1.0 / static_cast<double>(end - begin);
      std::vector<std::vector<double>> grads;
      for (const Parameter& p : params) grads.emplace_back(p.values.size(), 0.0);
      for (std::size_t i = begin; i < end; ++i) {
        const std::size_t idx = order[i];
        TrainSample s = data.train[idx];
        const std::uint64_t sample_seed = sampling::derive_seed(epoch_seed, idx);
        if (config.resample_prompts_each_epoch)
          resample_prompts(s, config.points_per_prompt, sample_seed);
        if (config.augment) s = augment(s, sampling::derive_seed(sample_seed, 1));
        const RealMap prob = model.forward(s.image, s.prompt_points);
        const LossReport l = loss(prob, s.gt_mask, config.dice_epsilon);
        sum.bce += l.bce;
        sum.dice += l.dice;
        sum.total += l.total;
        RealMap g = loss_gradient(prob, s.gt_mask, config.dice_epsilon);
        for (double& v : g.data) v *= scale;
        const auto sample_grads = model.backward(s.image, s.prompt_points, g);
        require(sample_grads.size() == params.size(), ErrorCode::kInvalidArgument,
                "model '" + model.name() + "' returned a gradient of the wrong layout");
        for (std::size_t k = 0; k < params.size(); ++k) {
          require(sample_grads[k].size() == grads[k].size(), ErrorCode::kInvalidArgument,
                  "model '" + model.name() + "' returned a gradient of the wrong size");
          for (std::size_t e = 0; e < grads[k].size(); ++e) grads[k][e] += sample_grads[k][e];
        }
      }
      last_lr = cosine_lr(config.lr_init, progress.step, result.total_steps);
      opt.step(params, grads, trainable, last_lr);
      ++progress.step;
    }

    EpochMetrics em;
    em.epoch = epoch;
    em.step = progress.step;
    em.lr = last_lr;
    em.mean_loss = {sum.bce / n, sum.dice / n, 0.0};
    em.mean_loss.total = sum.total / n;
    if (!data.val.empty()) {
      double dice = 0.0;
      for (const TrainSample& s : data.val) dice += dice_score(model.forward(s.image, s.prompt_points), s.gt_mask);
      em.val_dice = dice / static_cast<double>(data.val.size());
    }

    const double score = em.val_dice ? *em.val_dice : -em.mean_loss.total;
    const int previous_best = progress.best_epoch;
    const int previous_last = epoch - 1;
    if (score > progress.best_score) {
      progress.best_score = score;
      progress.best_epoch = epoch;
    }
    progress.epoch = epoch;

    const fs::path ckpt = checkpoint_path(options.out_dir, options.run_id, epoch);
    write_atomic(ckpt, [&](std::ostream& out) { model.save(out); });
    const json side = {{"epoch", epoch},
                       {"step", progress.step},
                       {"best_epoch", progress.best_epoch},
                       {"best_score", progress.best_score},
                       {"optimizer", opt.state()}};
    write_atomic(sidecar_path(ckpt), [&](std::ostream& out) { out << side.dump(); });
    for (int old : {previous_best, previous_last})
      if (old > 0 && old != epoch && old != progress.best_epoch)
        remove_checkpoint(checkpoint_path(options.out_dir, options.run_id, old));

    {
      std::ofstream csv(result.metrics_csv, std::ios::app);
      require(csv.good(), ErrorCode::kIo, "cannot append to " + result.metrics_csv.string());
      csv << epoch << ',' << em.step << ',' << fmt(em.lr) << ',' << fmt(em.mean_loss.bce) << ','
          << fmt(em.mean_loss.dice) << ',' << fmt(em.mean_loss.total) << ','
          << (em.val_dice ? fmt(*em.val_dice) : "") << '\n';
    }

    result.epochs.push_back(em);
    result.last_checkpoint = ckpt;
    result.best_epoch = progress.best_epoch;
    result.best_checkpoint = checkpoint_path(options.out_dir, options.run_id, progress.best_epoch);
    if (options.on_epoch) options.on_epoch(em);
  }
  return result;
}

}  // namespace tapseg::finetune
