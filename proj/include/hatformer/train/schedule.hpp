// Copyright 2026 The hatformer Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include <nlohmann/json.hpp>

#include "hatformer/error.hpp"

namespace hatformer::train {

enum class StopMetric { kValLoss, kValCer };

inline std::string to_string(StopMetric m) { return m == StopMetric::kValLoss ? "val_loss" : "val_cer"; }

struct StageConfig {
  int stage = 1;
  int batch_size = 8;
  double peak_lr = 5e-5;
  long long warmup_steps = 20000;
  StopMetric stop_metric = StopMetric::kValLoss;
  /// Evaluations without improvement tolerated before stopping.
  int patience = 5;
  long long max_steps = 200000;
  long long eval_every = 500;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Global gradient-norm clip; 0 disables clipping.
  double clip_norm = 1.0;
  std::uint64_t seed = 1;
  /// Collapse whitespace in labels before tokenizing them for training.
  bool train_time_normalize = false;
  /// Cap on validation lines decoded for val CER (0 = all).
  int val_cer_lines = 0;

  static StageConfig defaults(int stage) {
    StageConfig c;
    c.stage = stage;
    if (stage == 2) {
      c.peak_lr = 1e-4;
      c.warmup_steps = 2000;
      c.stop_metric = StopMetric::kValCer;
    } else if (stage != 1) {
      throw ConfigError("stage must be 1 or 2");
    }
    return c;
  }

  void validate() const {
    if (stage != 1 && stage != 2) throw ConfigError("stage must be 1 or 2");
    if (batch_size < 1) throw ConfigError("batch_size must be positive");
    if (!(peak_lr > 0) || !std::isfinite(peak_lr)) throw ConfigError("peak_lr must be positive");
    if (warmup_steps < 1) throw ConfigError("warmup_steps must be at least 1");
    if (patience < 0) throw ConfigError("patience must be non-negative");
    if (max_steps < 1 || eval_every < 1) throw ConfigError("max_steps and eval_every must be positive");
    if (weight_decay < 0 || clip_norm < 0) throw ConfigError("weight_decay and clip_norm must be non-negative");
    if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1 && eps > 0)) throw ConfigError("invalid Adam constants");
  }
};

inline nlohmann::json to_json(const StageConfig& c) {
  return {{"stage", c.stage},
          {"batch_size", c.batch_size},
          {"peak_lr", c.peak_lr},
          {"warmup_steps", c.warmup_steps},
          {"stop_metric", to_string(c.stop_metric)},
          {"patience", c.patience},
          {"max_steps", c.max_steps},
          {"eval_every", c.eval_every},
          {"weight_decay", c.weight_decay},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"eps", c.eps},
          {"clip_norm", c.clip_norm},
          {"seed", c.seed},
          {"train_time_normalize", c.train_time_normalize},
          {"val_cer_lines", c.val_cer_lines}};
}

/// Starts from the defaults of `stage` (or of j["stage"]); unknown keys are rejected.
inline StageConfig stage_config_from_json(const nlohmann::json& j, int stage = 0) {
  if (!j.is_object()) throw ConfigError("stage config must be a JSON object");
  try {
    if (stage == 0) stage = j.value("stage", 1);
    auto c = StageConfig::defaults(stage);
    for (const auto& [k, v] : j.items()) {
      if (k == "stage") {
        if (v.get<int>() != stage) throw ConfigError("stage config is for stage " + v.dump());
      } else if (k == "batch_size") c.batch_size = v.get<int>();
      else if (k == "peak_lr") c.peak_lr = v.get<double>();
      else if (k == "warmup_steps") c.warmup_steps = v.get<long long>();
      else if (k == "stop_metric") {
        const auto s = v.get<std::string>();
        if (s == "val_loss") c.stop_metric = StopMetric::kValLoss;
        else if (s == "val_cer") c.stop_metric = StopMetric::kValCer;
        else throw ConfigError("stop_metric must be val_loss or val_cer");
      } else if (k == "patience") c.patience = v.get<int>();
      else if (k == "max_steps") c.max_steps = v.get<long long>();
      else if (k == "eval_every") c.eval_every = v.get<long long>();
      else if (k == "weight_decay") c.weight_decay = v.get<double>();
      else if (k == "beta1") c.beta1 = v.get<double>();
      else if (k == "beta2") c.beta2 = v.get<double>();
      else if (k == "eps") c.eps = v.get<double>();
      else if (k == "clip_norm") c.clip_norm = v.get<double>();
      else if (k == "seed") c.seed = v.get<std::uint64_t>();
      else if (k == "train_time_normalize") c.train_time_normalize = v.get<bool>();
      else if (k == "val_cer_lines") c.val_cer_lines = v.get<int>();
      else throw ConfigError("unknown stage config field '" + k + "'");
    }
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("stage config: ") + e.what());
  }
}

/// Linear warmup, then inverse square root decay:
/// peak_lr * min(step / warmup, sqrt(warmup / step)).
inline double lr_at(long long step, const StageConfig& c) {
  if (step < 1) throw ValidationError("lr_at is defined for step >= 1");
  const double s = static_cast<double>(step), w = static_cast<double>(c.warmup_steps);
  return c.peak_lr * std::min(s / w, std::sqrt(w / s));
}

}  // namespace hatformer::train
