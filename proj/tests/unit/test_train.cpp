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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include <gtest/gtest.h>

#include "hatformer/train/trainer.hpp"
#include "support/train_fixtures.hpp"

using namespace hatformer;
using namespace hatformer::train;
using hatformer::testing::loop_config;
using hatformer::testing::toy_line;
using hatformer::testing::toy_set;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("hatformer_train_" + name);
  std::filesystem::remove_all(d);
  return d;
}

StageConfig quick_config() {
  auto c = StageConfig::defaults(1);
  c.batch_size = 2;
  c.peak_lr = 3e-3;
  c.warmup_steps = 10;
  c.eval_every = 5;
  c.max_steps = 40;
  c.patience = 100;
  return c;
}

std::size_t count_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string l; std::getline(in, l);) ++n;
  return n;
}

}  // namespace

// ---------------------------------------------------------------- schedule

TEST(Schedule, ClosedFormPoints) {
  auto c = StageConfig::defaults(1);
  c.peak_lr = 2.0;
  c.warmup_steps = 1000;
  EXPECT_DOUBLE_EQ(lr_at(1000, c), 2.0);
  EXPECT_DOUBLE_EQ(lr_at(500, c), 1.0);
  EXPECT_DOUBLE_EQ(lr_at(4000, c), 1.0);
  EXPECT_DOUBLE_EQ(lr_at(1, c), 2.0 / 1000.0);
  EXPECT_DOUBLE_EQ(lr_at(2000, c), 2.0 / std::sqrt(2.0));
}

TEST(Schedule, ContinuousAtWarmupAndDecreasingAfter) {
  auto c = StageConfig::defaults(2);
  const auto w = c.warmup_steps;
  EXPECT_NEAR(lr_at(w - 1, c), lr_at(w, c), c.peak_lr / static_cast<double>(w) + 1e-15);
  EXPECT_NEAR(lr_at(w + 1, c), lr_at(w, c), c.peak_lr / static_cast<double>(w));
  for (long long s = w; s < 20 * w; s += 97) EXPECT_GT(lr_at(s, c), lr_at(s + 1, c));
  for (long long s = 1; s < w; s += 13) EXPECT_LT(lr_at(s, c), lr_at(s + 1, c));
}

TEST(Schedule, RejectsStepZero) {
  EXPECT_THROW(lr_at(0, StageConfig::defaults(1)), ValidationError);
  EXPECT_THROW(lr_at(-3, StageConfig::defaults(1)), ValidationError);
}

TEST(StageConfigTest, Defaults) {
  const auto a = StageConfig::defaults(1), b = StageConfig::defaults(2);
  EXPECT_DOUBLE_EQ(a.peak_lr, 5e-5);
  EXPECT_EQ(a.warmup_steps, 20000);
  EXPECT_EQ(a.stop_metric, StopMetric::kValLoss);
  EXPECT_DOUBLE_EQ(b.peak_lr, 1e-4);
  EXPECT_EQ(b.warmup_steps, 2000);
  EXPECT_EQ(b.stop_metric, StopMetric::kValCer);
  EXPECT_THROW(StageConfig::defaults(3), ConfigError);
}

TEST(StageConfigTest, JsonRoundTripAndStrictness) {
  auto c = quick_config();
  c.seed = 99;
  c.train_time_normalize = true;
  const auto back = stage_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(stage_config_from_json({{"stage", 2}}).warmup_steps, 2000);
  EXPECT_EQ(stage_config_from_json(nlohmann::json::object(), 2).stop_metric, StopMetric::kValCer);
  EXPECT_THROW(stage_config_from_json({{"learning_rate", 1}}), ConfigError);
  EXPECT_THROW(stage_config_from_json({{"warmup_steps", 0}}), ConfigError);
  EXPECT_THROW(stage_config_from_json({{"stop_metric", "bleu"}}), ConfigError);
  EXPECT_THROW(stage_config_from_json({{"batch_size", "8"}}), ConfigError);
  EXPECT_THROW(stage_config_from_json({{"stage", 2}}, 1), ConfigError);
}

// ---------------------------------------------------------------- optimizer

TEST(AdamWTest, FirstStepIsSignedLearningRate) {
  // With fresh moments the bias-corrected update is g / (|g| + eps).
  auto p = model::init_params<double>(loop_config(), 3);
  auto g = model::zeros_like(p);
  g.out_w(0, 0) = 0.5;
  g.out_w(1, 0) = -2.0;
  g.out_b(3) = 4.0;
  const auto before = p;
  AdamW<double> opt(p, 0.9, 0.999, 1e-8, 0.1);
  opt.step(p, g, 0.01);
  const double w00 = before.out_w(0, 0), w10 = before.out_w(1, 0), w22 = before.out_w(2, 2);
  EXPECT_NEAR(p.out_w(0, 0), w00 - 0.01 * 0.5 / (0.5 + 1e-8) - 0.01 * 0.1 * w00, 1e-15);
  EXPECT_NEAR(p.out_w(1, 0), w10 + 0.01 * 2.0 / (2.0 + 1e-8) - 0.01 * 0.1 * w10, 1e-15);
  // Zero gradient: decay only on weights, nothing on biases.
  EXPECT_NEAR(p.out_w(2, 2), w22 * (1 - 0.001), 1e-15);
  EXPECT_NEAR(p.out_b(3), before.out_b(3) - 0.01 * 4.0 / (4.0 + 1e-8), 1e-15);
  EXPECT_EQ(p.out_b(4), before.out_b(4));
  EXPECT_EQ(p.decoder[0].ln1.gamma, before.decoder[0].ln1.gamma);
}

TEST(AdamWTest, DecaySelection) {
  EXPECT_TRUE(is_decayed("enc.0.attn.wq"));
  EXPECT_TRUE(is_decayed("out.w"));
  EXPECT_TRUE(is_decayed("dec.tok"));
  EXPECT_FALSE(is_decayed("enc.0.attn.bq"));
  EXPECT_FALSE(is_decayed("dec.norm.gamma"));
  EXPECT_FALSE(is_decayed("enc.0.ln1.beta"));
  EXPECT_FALSE(is_decayed("enc.cls"));
  EXPECT_FALSE(is_decayed("patch.b"));
}

TEST(AdamWTest, GlobalNormAndScale) {
  auto g = model::zeros_like(model::init_params<double>(loop_config(), 1));
  g.out_b(0) = 3.0;
  g.patch_w(0, 0) = 4.0;
  EXPECT_DOUBLE_EQ(global_norm(g), 5.0);
  scale(g, 0.5);
  EXPECT_DOUBLE_EQ(global_norm(g), 2.5);
}

// ---------------------------------------------------------------- data

TEST(Data, LoadSplitSkipsOverlongLabels) {
  const auto dir = scratch("load");
  std::filesystem::create_directories(dir / "images");
  const std::vector<std::pair<std::string, synth::Split>> items = {
      {"ab", synth::Split::kTrain}, {"abcdefghij", synth::Split::kTrain}, {"cd", synth::Split::kVal}};
  {
    std::ofstream m(dir / "manifest.jsonl");
    for (std::size_t i = 0; i < items.size(); ++i) {
      synth::ManifestEntry e;
      e.image = "images/" + std::to_string(i) + ".png";
      e.text = items[i].first;
      e.split = items[i].second;
      save_png(toy_line(e.text), dir / e.image);
      m << to_json(e).dump() << "\n";
    }
  }
  const bbpe::MergeTable table;
  std::vector<std::string> logged;
  LoadOptions o;
  o.max_decode_len = 8;
  o.log = [&](const std::string& s) { logged.push_back(s); };
  const auto train = load_split(dir / "manifest.jsonl", synth::Split::kTrain, table, o);
  ASSERT_EQ(train.size(), 1u);
  EXPECT_EQ(train.texts[0], "ab");
  EXPECT_EQ(train.ids[0], "0");
  EXPECT_EQ(train.examples[0].label, (std::vector<bbpe::TokenId>{'a', 'b'}));
  EXPECT_EQ(train.examples[0].canvas.strip_width_px, 64);
  ASSERT_EQ(logged.size(), 1u);
  EXPECT_NE(logged[0].find("images/1.png"), std::string::npos);
  EXPECT_EQ(load_split(dir / "manifest.jsonl", synth::Split::kVal, table, o).texts,
            std::vector<std::string>{"cd"});
  EXPECT_TRUE(load_split(dir / "manifest.jsonl", synth::Split::kTest, table, o).empty());
}

TEST(Data, TrainTimeNormalizeCollapsesWhitespace) {
  const bbpe::MergeTable table;
  const auto ex = make_example(toy_line("a  b "), "a  b ", table, true);
  EXPECT_EQ(bbpe::decode(table, ex.label), "a b");
  EXPECT_EQ(bbpe::decode(table, make_example(toy_line("a  b"), "a  b", table, false).label), "a  b");
}

// ---------------------------------------------------------------- evaluate

TEST(Evaluate, MeanCerIsLengthWeightedAggregate) {
  const bbpe::MergeTable table;
  const auto set = toy_set({"abc", "d", "hello", "xy"}, table);
  const auto p = model::init_params<float>(loop_config(), 5);
  const auto ev = evaluate(p, set, table, {.beam_width = 2, .length_penalty = 0.5, .max_len = 8});
  long long errors = 0, chars = 0;
  for (const auto& r : ev.score.records) {
    errors += r.errors();
    chars += r.ref_chars;
    EXPECT_EQ(r.image, set.images[&r - ev.score.records.data()]);
  }
  EXPECT_EQ(chars, 3 + 1 + 5 + 2);
  EXPECT_DOUBLE_EQ(ev.score.cer, static_cast<double>(errors) / static_cast<double>(chars));
  EXPECT_EQ(ev.failures, 0u);
}

TEST(Evaluate, DecodeFailureCountsAsEmptyPrediction) {
  const bbpe::MergeTable table;
  auto set = toy_set({"abcd", "ef"}, table);
  set.examples[0].canvas.pixels[0] = std::numeric_limits<float>::quiet_NaN();
  const auto p = model::init_params<float>(loop_config(), 5);
  const auto ev = evaluate(p, set, table, {.beam_width = 1, .length_penalty = 0.0, .max_len = 8});
  EXPECT_EQ(ev.failures, 1u);
  EXPECT_EQ(ev.score.records[0].prediction, "");
  EXPECT_EQ(ev.score.records[0].deletions, 4);
  EXPECT_DOUBLE_EQ(*ev.score.records[0].cer, 1.0);
}

TEST(Evaluate, EmptySplitRejected) {
  const bbpe::MergeTable table;
  EXPECT_THROW(evaluate(model::init_params<float>(loop_config(), 5), LineSet{}, table, {}), ValidationError);
}

// ---------------------------------------------------------------- train_stage

TEST(TrainStage, PatienceZeroStopsAtFirstNonImprovingEvaluation) {
  const bbpe::MergeTable table;
  const auto set = toy_set({"ab", "cd"}, table);
  auto c = quick_config();
  // Updates this small vanish in float rounding, so every later
  // evaluation ties the first one.
  c.peak_lr = 1e-30;
  c.weight_decay = 0.0;
  c.patience = 0;
  const auto r = train_stage(set, set, table, model::init_params<float>(loop_config(), 2), c);
  ASSERT_EQ(r.history.size(), 2u);
  EXPECT_EQ(r.steps, 2 * c.eval_every);
  EXPECT_EQ(r.best_step, c.eval_every);
  EXPECT_EQ(r.history[0].val_loss, r.history[1].val_loss);

  c.patience = 2;
  EXPECT_EQ(train_stage(set, set, table, model::init_params<float>(loop_config(), 2), c).history.size(), 4u);
}

TEST(TrainStage, BestSnapshotIsNeverWorseThanAnyEvaluation) {
  const bbpe::MergeTable table;
  const auto set = toy_set({"ab", "cd", "ef"}, table);
  const auto held_out = toy_set({"ba", "fc"}, table);
  auto c = quick_config();
  c.eval_every = 1;
  c.max_steps = 25;
  c.peak_lr = 0.05;  // large enough to make the curve noisy
  c.warmup_steps = 1;
  const auto r = train_stage(set, held_out, table, model::init_params<float>(loop_config(), 4), c);
  ASSERT_EQ(r.history.size(), 25u);
  double lowest = std::numeric_limits<double>::infinity();
  int rises = 0;
  for (std::size_t i = 0; i < r.history.size(); ++i) {
    lowest = std::min(lowest, r.history[i].val_loss);
    if (i && r.history[i].val_loss > r.history[i - 1].val_loss) ++rises;
  }
  EXPECT_GT(rises, 0);
  EXPECT_EQ(r.best_metric, lowest);
  EXPECT_EQ(mean_loss(r.best, held_out), lowest);
  EXPECT_EQ(r.history[static_cast<std::size_t>(r.best_step - 1)].val_loss, lowest);
}

TEST(TrainStage, StageTwoTracksCerAndWritesRunDirectory) {
  const bbpe::MergeTable table;
  const auto set = toy_set({"ab", "cd"}, table);
  auto c = quick_config();
  c.stage = 2;
  c.stop_metric = StopMetric::kValCer;
  c.max_steps = 10;
  const auto dir = scratch("run");
  RunOptions o;
  o.out_dir = dir;
  std::size_t callbacks = 0;
  o.on_eval = [&](const EvalPoint& e) {
    ++callbacks;
    EXPECT_TRUE(e.val_cer.has_value());
  };
  const auto r = train_stage(set, set, table, model::init_params<float>(loop_config(), 2), c, o);
  EXPECT_EQ(callbacks, 2u);
  EXPECT_EQ(r.stop_reason, "reached max_steps");
  for (const char* f : {"config.json", "metrics.csv", "last.bin", "best.bin", "eval.jsonl"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  EXPECT_EQ(count_lines(dir / "metrics.csv"), 3u);
  EXPECT_EQ(count_lines(dir / "eval.jsonl"), 2u);
  EXPECT_GT(r.best_cer_step, 0);
  EXPECT_GT(r.best_loss_step, 0);
  const auto cfg = nlohmann::json::parse(std::ifstream(dir / "config.json"));
  EXPECT_EQ(cfg.at("stage").at("stop_metric"), "val_cer");
  EXPECT_EQ(model::model_config_from_json(cfg.at("model")), loop_config());
}

TEST(TrainStage, CheckpointRoundTripReproducesCer) {
  const bbpe::MergeTable table;
  const auto set = toy_set({"ab", "cd", "abc"}, table);
  auto c = quick_config();
  c.max_steps = 20;
  const auto dir = scratch("ckpt");
  RunOptions o;
  o.out_dir = dir;
  const auto r = train_stage(set, set, table, model::init_params<float>(loop_config(), 8), c, o);
  const auto loaded = model::load_checkpoint<float>(dir / "best.bin");
  const model::DecodeConfig dc{.beam_width = 3, .length_penalty = 0.5, .max_len = 8};
  const auto a = evaluate(r.best, set, table, dc), b = evaluate(loaded, set, table, dc);
  EXPECT_EQ(a.score.cer, b.score.cer);
  EXPECT_EQ(a.tokens, b.tokens);
}

TEST(TrainStage, DivergenceSavesLastFiniteState) {
  const bbpe::MergeTable table;
  const auto set = toy_set({"ab", "cd"}, table);
  auto c = quick_config();
  c.peak_lr = 1e30;
  c.warmup_steps = 1;
  const auto dir = scratch("diverge");
  RunOptions o;
  o.out_dir = dir;
  EXPECT_THROW(train_stage(set, set, table, model::init_params<float>(loop_config(), 2), c, o), TrainingError);
  ASSERT_TRUE(std::filesystem::exists(dir / "last.bin"));
  model::CheckpointInfo info;
  EXPECT_TRUE(model::all_finite(model::load_checkpoint<float>(dir / "last.bin", &info)));
  EXPECT_TRUE(info.meta.at("diverged").get<bool>());
}

TEST(TrainStage, RejectsEmptySplits) {
  const bbpe::MergeTable table;
  const auto set = toy_set({"ab"}, table);
  const auto p = model::init_params<float>(loop_config(), 2);
  EXPECT_THROW(train_stage(LineSet{}, set, table, p, quick_config()), ValidationError);
  EXPECT_THROW(train_stage(set, LineSet{}, table, p, quick_config()), ValidationError);
}

TEST(TrainStage, OverfitsFourLines) {
  const bbpe::MergeTable table;
  const auto set = toy_set({"ab", "cd", "abc", "dba"}, table);
  auto c = quick_config();
  c.batch_size = 4;
  c.max_steps = 400;
  c.eval_every = 50;
  c.peak_lr = 3e-3;
  c.warmup_steps = 20;
  c.stop_metric = StopMetric::kValCer;
  c.stage = 2;
  c.patience = 100;
  const auto r = train_stage(set, set, table, model::init_params<float>(loop_config(), 1), c);
  EXPECT_EQ(r.best_metric, 0.0);
}
