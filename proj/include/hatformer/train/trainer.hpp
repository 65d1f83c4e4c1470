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

/**
 * @file trainer.hpp
 * @brief Stage loop, validation and corpus evaluation.
 *
 * A run directory holds config.json, metrics.csv (one row per evaluation),
 * last.bin, best.bin and, once the stage ends, eval.jsonl for the
 * validation split scored with the returned snapshot.
 */

#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hatformer/eval/cer.hpp"
#include "hatformer/model/beam_search.hpp"
#include "hatformer/model/checkpoint.hpp"
#include "hatformer/rng.hpp"
#include "hatformer/train/adamw.hpp"
#include "hatformer/train/data.hpp"
#include "hatformer/train/schedule.hpp"

namespace hatformer::train {

/// Default scoring policy: whitespace collapsed, nothing else.
inline eval::NormalizationPolicy default_scoring_policy() {
  eval::NormalizationPolicy p;
  p.collapse_whitespace = true;
  return p;
}

struct Recognition {
  std::string text;
  std::vector<TokenId> tokens;
  bool finished = false;
};

template <class T>
Recognition recognize(const model::ModelParams<T>& p, const BlockCanvas& canvas, const bbpe::MergeTable& table,
                      const model::DecodeConfig& dc) {
  const auto memory = model::encode_canvas(canvas, p);
  auto r = model::beam_search(memory, p, dc);
  return {bbpe::decode(table, r.tokens), std::move(r.tokens), r.finished};
}

struct Evaluation {
  eval::CorpusScore score;
  std::vector<std::vector<TokenId>> tokens;
  std::size_t failures = 0;
};

/// Decodes every line of `set` and scores it. A line whose decoding throws
/// gets an empty prediction, i.e. CER 1 for that line.
template <class T>
Evaluation evaluate(const model::ModelParams<T>& p, const LineSet& set, const bbpe::MergeTable& table,
                    const model::DecodeConfig& dc, const eval::NormalizationPolicy& policy = default_scoring_policy(),
                    eval::Aggregation agg = eval::Aggregation::kCorpus, std::size_t limit = 0) {
  const std::size_t n = limit ? std::min(limit, set.size()) : set.size();
  if (n == 0) throw ValidationError("cannot evaluate an empty split");
  Evaluation ev;
  std::vector<std::pair<std::string, std::string>> pairs;
  for (std::size_t i = 0; i < n; ++i) {
    try {
      auto r = recognize(p, set.examples[i].canvas, table, dc);
      pairs.emplace_back(set.texts[i], std::move(r.text));
      ev.tokens.push_back(std::move(r.tokens));
    } catch (const std::exception&) {
      pairs.emplace_back(set.texts[i], std::string{});
      ev.tokens.emplace_back();
      ++ev.failures;
    }
  }
  ev.score = eval::score_corpus(pairs, policy, agg, std::span(set.ids).first(n));
  for (std::size_t i = 0; i < n; ++i) ev.score.records[i].image = set.images[i];
  return ev;
}

/// Token-weighted mean teacher-forced loss over a split.
template <class T>
double mean_loss(const model::ModelParams<T>& p, const LineSet& set) {
  double sum = 0.0;
  long long tokens = 0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto l = model::batch_loss(p, std::span<const model::Example>(set.examples).subspan(i, 1), nullptr);
    sum += l.mean_loss * static_cast<double>(l.tokens);
    tokens += l.tokens;
  }
  return tokens ? sum / static_cast<double>(tokens) : 0.0;
}

struct EvalPoint {
  long long step = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  std::optional<double> val_cer;
  double seconds = 0.0;
};

template <class T>
struct StageResult {
  /// Snapshot with the best stop metric.
  model::ModelParams<T> best;
  model::ModelParams<T> last;
  long long steps = 0;
  long long best_step = 0;
  double best_metric = std::numeric_limits<double>::infinity();
  long long best_loss_step = 0;
  double best_loss = std::numeric_limits<double>::infinity();
  long long best_cer_step = 0;
  double best_cer = std::numeric_limits<double>::infinity();
  std::vector<EvalPoint> history;
  std::string stop_reason;
};

struct RunOptions {
  /// Empty: nothing is written.
  std::filesystem::path out_dir;
  model::DecodeConfig decode{.beam_width = 1, .length_penalty = 0.0, .max_len = 128};
  /// Compute val CER even when the stop metric is val_loss.
  bool track_cer = false;
  std::function<void(const EvalPoint&)> on_eval;
};

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& s) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << s;
}

inline std::string csv_row(const EvalPoint& e) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%lld,%.9g,%.9g,%.9g,%s,%.3f\n", e.step, e.lr, e.train_loss, e.val_loss,
                e.val_cer ? std::to_string(*e.val_cer).c_str() : "", e.seconds);
  return buf;
}

}  // namespace detail

/// Runs one stage from `init`. Evaluates every cfg.eval_every steps and
/// stops once the stop metric has failed to improve on more than
/// cfg.patience consecutive evaluations, or at cfg.max_steps.
template <class T>
StageResult<T> train_stage(const LineSet& train, const LineSet& val, const bbpe::MergeTable& table,
                           model::ModelParams<T> init, const StageConfig& cfg, const RunOptions& opts = {}) {
  cfg.validate();
  if (train.empty()) throw ValidationError("training split is empty");
  if (val.empty()) throw ValidationError("validation split is empty");
  const bool writes = !opts.out_dir.empty();
  if (writes) {
    std::filesystem::create_directories(opts.out_dir);
    const nlohmann::json snapshot = {{"stage", to_json(cfg)}, {"model", model::to_json(init.config)}};
    detail::write_text(opts.out_dir / "config.json", snapshot.dump(2) + "\n");
    detail::write_text(opts.out_dir / "metrics.csv", "step,lr,train_loss,val_loss,val_cer,seconds\n");
  }
  const bool use_cer = cfg.stop_metric == StopMetric::kValCer || opts.track_cer;

  StageResult<T> res;
  auto& p = init;
  res.best = p;
  AdamW<T> opt(p, cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay);
  std::vector<std::size_t> order(train.size());
  std::size_t cursor = order.size();
  std::uint64_t epoch = 0;
  std::vector<model::Example> batch;
  double loss_sum = 0.0;
  long long loss_count = 0;
  int stale = 0;
  const auto t0 = std::chrono::steady_clock::now();

  auto divergence = [&](const std::string& what) {
    if (writes) model::save_checkpoint(p, opts.out_dir / "last.bin", {{"step", res.steps}, {"diverged", true}});
    throw TrainingError("training diverged at step " + std::to_string(res.steps + 1) + ": " + what);
  };

  for (long long step = 1; step <= cfg.max_steps; ++step) {
    batch.clear();
    while (batch.size() < static_cast<std::size_t>(cfg.batch_size)) {
      if (cursor == order.size()) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        CounterRng(cfg.seed, epoch++, 3).shuffle(order);
        cursor = 0;
      }
      batch.push_back(train.examples[order[cursor++]]);
    }
    auto grads = model::zeros_like(p);
    model::BatchLoss bl;
    try {
      bl = model::batch_loss(p, batch, &grads);
    } catch (const NumericError& e) {
      divergence(e.what());
    }
    const double norm = global_norm(grads);
    if (cfg.clip_norm > 0 && norm > cfg.clip_norm) scale(grads, cfg.clip_norm / norm);
    const double lr = lr_at(step, cfg);
    const auto previous = p;
    opt.step(p, grads, lr);
    if (!model::all_finite(p)) {
      p = previous;
      divergence("non-finite parameters after the update");
    }
    res.steps = step;
    loss_sum += bl.mean_loss;
    ++loss_count;

    if (step % cfg.eval_every != 0 && step != cfg.max_steps) continue;
    EvalPoint e;
    e.step = step;
    e.lr = lr;
    e.train_loss = loss_sum / static_cast<double>(loss_count);
    loss_sum = 0.0;
    loss_count = 0;
    e.val_loss = mean_loss(p, val);
    if (use_cer) {
      e.val_cer = evaluate(p, val, table, opts.decode, default_scoring_policy(), eval::Aggregation::kCorpus,
                           static_cast<std::size_t>(cfg.val_cer_lines))
                      .score.cer;
    }
    e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    res.history.push_back(e);

    if (e.val_loss < res.best_loss) {
      res.best_loss = e.val_loss;
      res.best_loss_step = step;
    }
    if (e.val_cer && *e.val_cer < res.best_cer) {
      res.best_cer = *e.val_cer;
      res.best_cer_step = step;
    }
    const double metric = cfg.stop_metric == StopMetric::kValLoss ? e.val_loss : *e.val_cer;
    if (metric < res.best_metric) {
      res.best_metric = metric;
      res.best_step = step;
      res.best = p;
      stale = 0;
      if (writes) model::save_checkpoint(p, opts.out_dir / "best.bin", {{"step", step}, {"metric", metric}});
    } else {
      ++stale;
    }
    if (writes) {
      std::ofstream(opts.out_dir / "metrics.csv", std::ios::app) << detail::csv_row(e);
      model::save_checkpoint(p, opts.out_dir / "last.bin", {{"step", step}});
    }
    if (opts.on_eval) opts.on_eval(e);
    if (stale > cfg.patience) {
      res.stop_reason = to_string(cfg.stop_metric) + " did not improve for " + std::to_string(stale) + " evaluations";
      break;
    }
  }
  if (res.stop_reason.empty()) res.stop_reason = "reached max_steps";
  res.last = std::move(p);
  if (writes) {
    auto ev = evaluate(res.best, val, table, opts.decode);
    eval::write_jsonl(opts.out_dir / "eval.jsonl", ev.score.records);
  }
  return res;
}

}  // namespace hatformer::train
