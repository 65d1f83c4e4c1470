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

// Command-line front end. Results go to stdout as one JSON document;
// failures print {"error": {"kind", "message"}} to stderr and exit nonzero
// (2 for usage errors, 1 otherwise).

#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hatformer/eval/cer.hpp"
#include "hatformer/imaging/png_io.hpp"
#include "hatformer/model/checkpoint.hpp"
#include "hatformer/service/artifacts.hpp"
#include "hatformer/service/server.hpp"
#include "hatformer/synth/dataset.hpp"
#include "hatformer/synth/desk_corpus.hpp"
#include "hatformer/synth/paper.hpp"
#include "hatformer/train/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hatformer;

namespace {

void print(const json& j) { std::cout << j.dump(2) << std::endl; }

void log_line(const json& j) { std::cerr << j.dump() << std::endl; }

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& s) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + p.string());
  out << s;
}

json read_json(const fs::path& p) {
  try {
    return json::parse(read_file(p));
  } catch (const json::parse_error& e) {
    throw ConfigError(p.string() + ": " + e.what());
  }
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::istringstream in(read_file(p));
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) {
    if (!l.empty() && l.back() == '\r') l.pop_back();
    out.push_back(l);
  }
  return out;
}

const char* env_or(const char* name, const char* fallback) {
  const char* v = std::getenv(name);
  return v && *v ? v : fallback;
}

model::DecodeConfig decode_from_json(const json& j, model::DecodeConfig d) {
  for (const auto& [k, v] : j.items()) {
    if (k == "beam_width") d.beam_width = v.get<int>();
    else if (k == "length_penalty") d.length_penalty = v.get<double>();
    else if (k == "max_len") d.max_len = v.get<int>();
    else throw ConfigError("unknown decode field '" + k + "'");
  }
  d.validate();
  return d;
}

json to_json(const model::DecodeConfig& d) {
  return {{"beam_width", d.beam_width}, {"length_penalty", d.length_penalty}, {"max_len", d.max_len}};
}

json canvas_meta(const BlockCanvas& c, const LineImage& source) {
  return {{"schema", "hatformer.canvas/1"},
          {"row_height", c.row_height},
          {"strip_width_px", c.strip_width_px},
          {"rows_used", c.rows_used},
          {"lossy", c.lossy},
          {"stretched", c.stretched},
          {"source", {{"height", source.height}, {"width", source.width}}}};
}

// ---------------------------------------------------------------- corpus

struct CorpusArgs {
  std::string lang;
  std::size_t bytes = 5u << 20;
  std::uint64_t seed = 1;
  int vocabulary = 30000;
  fs::path out;
};

void run_corpus(const CorpusArgs& a) {
  synth::CorpusOptions o;
  o.seed = a.seed;
  o.target_bytes = a.bytes;
  o.vocabulary = a.vocabulary;
  const auto text = a.lang == "ar" ? synth::arabic_corpus(o) : synth::english_corpus(o);
  write_file(a.out, text);
  print({{"out", a.out.string()}, {"bytes", text.size()}, {"lang", a.lang}});
}

// ---------------------------------------------------------------- backgrounds

struct BackgroundArgs {
  fs::path out;
  int count = 8;
  std::uint64_t seed = 1;
  int height = 256;
  int width = 768;
};

void run_backgrounds(const BackgroundArgs& a) {
  if (a.count < 1) throw ConfigError("count must be positive");
  fs::create_directories(a.out);
  json files = json::array();
  for (int i = 0; i < a.count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "paper_%02d.png", i);
    save_png(synth::make_paper(a.seed * 1000 + static_cast<std::uint64_t>(i), a.height, a.width), a.out / name);
    files.push_back(name);
  }
  print({{"out", a.out.string()}, {"files", files}});
}

// ---------------------------------------------------------------- syngen

struct SyngenArgs {
  std::uint64_t seed = 7;
  std::size_t count = 100;
  fs::path out;
  fs::path fonts = synth::default_fonts_dir();
  fs::path backgrounds = synth::default_backgrounds_dir();
  fs::path corpus;
  int min_words = 1;
  int max_words = 20;
  int min_font_px = 36;
  int max_font_px = 56;
  int augmentation = -1;
  unsigned threads = 1;
};

synth::Corpus load_word_pool(const fs::path& explicit_path) {
  fs::path p = explicit_path;
  if (p.empty()) p = env_or("HATFORMER_ARABIC_CORPUS", "");
  if (!p.empty()) return synth::Corpus::load(p);
  synth::CorpusOptions o;
  o.target_bytes = 1 << 20;
  return synth::Corpus::from_text(synth::arabic_corpus(o));
}

void run_syngen(const SyngenArgs& a) {
  const auto pools = synth::load_pools(a.fonts, a.backgrounds, load_word_pool(a.corpus));
  synth::GenerateOptions o;
  o.threads = a.threads;
  o.synth.min_words = a.min_words;
  o.synth.max_words = a.max_words;
  o.synth.min_font_px = a.min_font_px;
  o.synth.max_font_px = a.max_font_px;
  if (a.augmentation >= 0) o.synth.fixed_augmentation = a.augmentation;
  o.log = [](const std::string& m) { log_line({{"skipped", m}}); };
  const auto r = synth::generate_dataset(a.seed, a.count, pools, a.out, o);
  print({{"manifest", (a.out / "manifest.jsonl").string()},
         {"written", r.written},
         {"skipped", r.skipped},
         {"resumed", r.resumed},
         {"splits", {{"train", r.sizes.train}, {"val", r.sizes.val}, {"test", r.sizes.test}}}});
}

// ---------------------------------------------------------------- blockproc

struct BlockprocArgs {
  fs::path in;
  fs::path out;
  fs::path meta;
  int row_height = 64;
  bool naive = false;
  bool unpack = false;
};

void run_blockproc(const BlockprocArgs& a) {
  const fs::path meta = a.meta.empty() ? fs::path(a.out).replace_extension(".json") : a.meta;
  if (a.unpack) {
    const fs::path sidecar = a.meta.empty() ? fs::path(a.in).replace_extension(".json") : a.meta;
    const auto m = read_json(sidecar);
    const auto img = load_png(a.in);
    if (img.height != BlockCanvas::kSize || img.width != BlockCanvas::kSize) {
      throw ValidationError("canvas image must be 384x384");
    }
    BlockCanvas c;
    c.pixels = img.pixels;
    c.row_height = m.at("row_height").get<int>();
    c.strip_width_px = m.at("strip_width_px").get<int>();
    c.rows_used = m.at("rows_used").get<int>();
    c.lossy = m.at("lossy").get<bool>();
    c.stretched = m.at("stretched").get<bool>();
    const auto strip = block_unpack(c);
    save_png(strip, a.out);
    print({{"out", a.out.string()}, {"height", strip.height}, {"width", strip.width}});
    return;
  }
  const auto img = load_png(a.in);
  const auto canvas = a.naive ? naive_resize(img) : block_pack(img, a.row_height);
  save_png(canvas, a.out);
  const auto j = canvas_meta(canvas, img);
  write_file(meta, j.dump(2) + "\n");
  print({{"out", a.out.string()}, {"meta", meta.string()}, {"canvas", j}});
}

// ---------------------------------------------------------------- tokenizer

struct TokTrainArgs {
  std::vector<fs::path> corpora;
  int vocab_size = 16384;
  std::uint64_t min_pair_count = 2;
  fs::path out;
};

void run_tok_train(const TokTrainArgs& a) {
  bbpe::ChunkCounter counter;
  std::size_t bytes = 0;
  for (const auto& p : a.corpora) {
    const auto text = read_file(p);
    bytes += text.size();
    counter.add(text);
  }
  const auto table = bbpe::train(counter, {.vocab_size = a.vocab_size, .min_pair_count = a.min_pair_count});
  table.save(a.out);
  print({{"out", a.out.string()}, {"vocab_size", table.vocab_size()}, {"corpus_bytes", bytes}});
}

struct TokCodecArgs {
  fs::path table;
  std::string text;
  fs::path in;
  std::string ids;
};

void run_tok_encode(const TokCodecArgs& a) {
  const auto table = bbpe::MergeTable::load(a.table);
  const auto text = a.in.empty() ? a.text : read_file(a.in);
  const auto ids = bbpe::encode(table, text);
  print({{"ids", ids}, {"tokens", ids.size()}, {"bytes", text.size()}});
}

void run_tok_decode(const TokCodecArgs& a) {
  const auto table = bbpe::MergeTable::load(a.table);
  std::vector<bbpe::TokenId> ids;
  std::string s = a.ids;
  for (char& c : s) {
    if (c == ',' || c == '[' || c == ']') c = ' ';
  }
  std::istringstream in(s);
  for (std::string tok; in >> tok;) {
    try {
      std::size_t n = 0;
      const long v = std::stol(tok, &n);
      if (n != tok.size()) throw std::invalid_argument(tok);
      ids.push_back(static_cast<bbpe::TokenId>(v));
    } catch (const std::exception&) {
      throw ValidationError("token id '" + tok + "' is not an integer");
    }
  }
  print({{"text", bbpe::decode(table, ids)}});
}

struct TokRatioArgs {
  fs::path base, custom, corpus;
};

void run_tok_ratio(const TokRatioArgs& a) {
  const auto base = bbpe::MergeTable::load(a.base);
  const auto custom = bbpe::MergeTable::load(a.custom);
  const auto text = read_file(a.corpus);
  print({{"ratio", bbpe::compactness_ratio(base, custom, text)},
         {"base_tokens", bbpe::encode(base, text).size()},
         {"custom_tokens", bbpe::encode(custom, text).size()}});
}

// ---------------------------------------------------------------- score

struct ScoreArgs {
  fs::path ref, pred, records, out, tables, policy;
  bool collapse_ws = false, remove_diacritics = false, replace_nc = false, replace_wc = false;
  bool per_line = false;
};

eval::NormalizationPolicy policy_from(const ScoreArgs& a) {
  eval::NormalizationPolicy p;
  if (!a.policy.empty()) p = eval::NormalizationPolicy::from_json(read_json(a.policy));
  if (!a.tables.empty()) eval::load_tables(p, a.tables);
  p.collapse_whitespace = p.collapse_whitespace || a.collapse_ws;
  p.remove_diacritics = p.remove_diacritics || a.remove_diacritics;
  p.replace_without_context = p.replace_without_context || a.replace_nc;
  p.replace_with_context = p.replace_with_context || a.replace_wc;
  p.validate();
  return p;
}

void run_score(const ScoreArgs& a) {
  const auto policy = policy_from(a);
  const auto agg = a.per_line ? eval::Aggregation::kPerLine : eval::Aggregation::kCorpus;
  eval::CorpusScore s;
  if (!a.records.empty()) {
    s = eval::rescore(eval::read_jsonl(a.records), policy, agg);
  } else {
    if (a.ref.empty() || a.pred.empty()) throw ConfigError("give --records, or both --ref and --pred");
    const auto refs = read_lines(a.ref), preds = read_lines(a.pred);
    if (refs.size() != preds.size()) {
      throw ValidationError("reference and prediction files differ in line count (" + std::to_string(refs.size()) +
                            " vs " + std::to_string(preds.size()) + ")");
    }
    std::vector<std::pair<std::string, std::string>> pairs;
    for (std::size_t i = 0; i < refs.size(); ++i) pairs.emplace_back(refs[i], preds[i]);
    s = eval::score_corpus(pairs, policy, agg);
  }
  if (!a.out.empty()) eval::write_jsonl(a.out, s.records);
  print({{"cer", s.cer},
         {"errors", s.errors},
         {"ref_chars", s.ref_chars},
         {"lines", s.records.size()},
         {"aggregation", a.per_line ? "per_line" : "corpus"},
         {"policy", policy.to_json()}});
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  int stage = 1;
  fs::path data, config, out, tokenizer, init;
  bool train_time_normalize = false;
  long long max_steps = 0;
  long long eval_every = 0;
};

void run_train(const TrainArgs& a) {
  const json cfg = a.config.empty() ? json::object() : read_json(a.config);
  if (!cfg.is_object()) throw ConfigError("training config must be a JSON object");
  json stage_json = json::object();
  for (const auto& [k, v] : cfg.items()) {
    if (k != "model" && k != "decode") stage_json[k] = v;
  }
  auto sc = train::stage_config_from_json(stage_json, a.stage);
  if (a.train_time_normalize) sc.train_time_normalize = true;
  if (a.max_steps > 0) sc.max_steps = a.max_steps;
  if (a.eval_every > 0) sc.eval_every = a.eval_every;
  sc.validate();

  const auto table = bbpe::MergeTable::load(a.tokenizer);
  model::ModelParams<float> init;
  if (!a.init.empty()) {
    init = model::load_checkpoint<float>(a.init);
    if (cfg.contains("model") && model::model_config_from_json(cfg.at("model")) != init.config) {
      throw ConfigError("model config differs from the initial checkpoint");
    }
  } else {
    json mj = cfg.value("model", json::object());
    if (!mj.contains("vocab_size")) mj["vocab_size"] = table.vocab_size();
    auto mc = model::model_config_from_json(mj);
    init = model::init_params<float>(mc, sc.seed);
  }
  if (init.config.vocab_size != table.vocab_size()) {
    throw ConfigError("model vocab_size " + std::to_string(init.config.vocab_size) + " does not match the tokenizer (" +
                      std::to_string(table.vocab_size()) + ")");
  }

  train::LoadOptions lo;
  lo.max_decode_len = init.config.max_decode_len;
  lo.collapse_whitespace = sc.train_time_normalize;
  std::size_t skipped = 0;
  lo.log = [&](const std::string& m) {
    ++skipped;
    log_line({{"skipped", m}});
  };
  const auto tr = train::load_split(a.data, synth::Split::kTrain, table, lo);
  const auto va = train::load_split(a.data, synth::Split::kVal, table, lo);

  train::RunOptions ro;
  ro.out_dir = a.out;
  ro.decode = decode_from_json(cfg.value("decode", json::object()),
                               {.beam_width = 1, .length_penalty = 0.0, .max_len = init.config.max_decode_len});
  ro.track_cer = true;
  ro.on_eval = [](const train::EvalPoint& e) {
    log_line({{"step", e.step}, {"lr", e.lr}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss},
              {"val_cer", e.val_cer ? json(*e.val_cer) : json(nullptr)}});
  };
  fs::create_directories(a.out);
  table.save(a.out / "tokenizer.json");
  const auto r = train::train_stage(tr, va, table, std::move(init), sc, ro);
  print({{"out", a.out.string()},
         {"train_lines", tr.size()},
         {"val_lines", va.size()},
         {"skipped", skipped},
         {"steps", r.steps},
         {"best_step", r.best_step},
         {"best_metric", r.best_metric},
         {"best_loss_step", r.best_loss_step},
         {"best_cer_step", r.best_cer_step},
         {"stop_reason", r.stop_reason}});
}

// ---------------------------------------------------------------- recognize

struct RecognizeArgs {
  fs::path checkpoint, tokenizer, image, data, out;
  std::string split = "test";
  int beam = 3;
  double length_penalty = 0.5;
  int max_len = 128;
  bool emit_attention = false;
};

void run_recognize(const RecognizeArgs& a) {
  model::CheckpointInfo info;
  const auto params = model::load_checkpoint<float>(a.checkpoint, &info);
  const fs::path tok = a.tokenizer.empty() ? a.checkpoint.parent_path() / "tokenizer.json" : a.tokenizer;
  const auto table = bbpe::MergeTable::load(tok);
  if (table.vocab_size() != params.config.vocab_size) throw ConfigError("tokenizer does not match the checkpoint");
  const model::DecodeConfig dc{.beam_width = a.beam, .length_penalty = a.length_penalty, .max_len = a.max_len};
  dc.validate();

  if (!a.image.empty()) {
    const auto r = train::recognize(params, block_pack(load_png(a.image)), table, dc);
    print({{"text", r.text}, {"tokens", r.tokens}, {"finished", r.finished}});
    return;
  }
  if (a.data.empty() || a.out.empty()) throw ConfigError("give --image, or --data with --out");

  std::vector<synth::Split> splits;
  if (a.split == "all") splits = {synth::Split::kTrain, synth::Split::kVal, synth::Split::kTest};
  else splits = {synth::split_from_string(a.split)};
  train::LineSet set;
  for (auto s : splits) {
    train::LoadOptions lo;
    lo.max_decode_len = 1 << 20;
    auto part = train::load_split(a.data, s, table, lo);
    for (std::size_t i = 0; i < part.size(); ++i) {
      set.examples.push_back(std::move(part.examples[i]));
      set.ids.push_back(part.ids[i]);
      set.texts.push_back(part.texts[i]);
      set.images.push_back(part.images[i]);
    }
  }
  if (set.empty()) throw ValidationError("no lines in split '" + a.split + "'");

  fs::create_directories(a.out / "images");
  if (a.emit_attention) fs::create_directories(a.out / "attention");
  std::vector<std::pair<std::string, std::string>> pairs;
  std::vector<std::string> attention_paths(set.size());
  std::size_t failures = 0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto& canvas = set.examples[i].canvas;
    save_png(block_unpack(canvas), a.out / "images" / (set.ids[i] + ".png"));
    try {
      const auto r = train::recognize(params, canvas, table, dc);
      if (a.emit_attention) {
        const auto rel = "attention/" + set.ids[i] + ".json";
        service::save_attention(service::trace_recognition(params, canvas, r.tokens, table), a.out / rel);
        attention_paths[i] = rel;
      }
      pairs.emplace_back(set.texts[i], r.text);
    } catch (const Error& e) {
      ++failures;
      log_line({{"id", set.ids[i]}, {"decode_error", {{"kind", e.kind()}, {"message", e.what()}}}});
      pairs.emplace_back(set.texts[i], std::string{});
    }
  }
  const auto policy = train::default_scoring_policy();
  auto score = eval::score_corpus(pairs, policy, eval::Aggregation::kCorpus, set.ids);
  for (std::size_t i = 0; i < set.size(); ++i) {
    score.records[i].image = "images/" + set.ids[i] + ".png";
    score.records[i].attention = attention_paths[i];
  }
  eval::write_jsonl(a.out / "eval.jsonl", score.records);
  const json meta = {{"checkpoint", fs::absolute(a.checkpoint).string()},
                     {"checkpoint_meta", info.meta},
                     {"model", model::to_json(params.config)},
                     {"decode", to_json(dc)},
                     {"scoring_policy", policy.to_json()},
                     {"split", a.split},
                     {"lines", set.size()},
                     {"cer", score.cer}};
  write_file(a.out / "meta.json", meta.dump(2) + "\n");
  print({{"out", a.out.string()}, {"lines", set.size()}, {"failures", failures}, {"cer", score.cer}});
}

// ---------------------------------------------------------------- serve

struct ServeArgs {
  fs::path run_dir;
  std::string host = "127.0.0.1";
  int port = 8080;
  fs::path static_dir;
};

void run_serve(const ServeArgs& a) {
  fs::path dir = a.run_dir.empty() ? fs::path(env_or("HATFORMER_RUN_DIR", "")) : a.run_dir;
  if (dir.empty()) throw ConfigError("give --run-dir or set HATFORMER_RUN_DIR");
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  service::Server server(dir, {.host = a.host, .port = a.port, .static_dir = a.static_dir});
  const int port = server.bind();
  json hello = {{"listening", "http://" + a.host + ":" + std::to_string(port)},
                {"run_dir", dir.string()},
                {"complete", server.store().complete()}};
  if (!server.store().complete()) hello["problem"] = server.store().problem();
  std::cout << hello.dump() << std::endl;
  server.listen();
}

void fail(const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hatformer: historical Arabic handwritten text recognition toolkit", "hatformer"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "hatformer 0.1.0");
  std::function<void()> action;

  CorpusArgs corpus;
  auto* c = app.add_subcommand("corpus", "Write a seeded stand-in text corpus");
  c->add_option("--lang", corpus.lang, "ar or en")->required()->check(CLI::IsMember({"ar", "en"}));
  c->add_option("--bytes", corpus.bytes, "Target size in bytes")->capture_default_str();
  c->add_option("--seed", corpus.seed, "Seed")->capture_default_str();
  c->add_option("--vocabulary", corpus.vocabulary, "Distinct words")->capture_default_str();
  c->add_option("--out", corpus.out, "Output text file")->required();
  c->callback([&] { action = [&] { run_corpus(corpus); }; });

  BackgroundArgs bg;
  auto* b = app.add_subcommand("backgrounds", "Write procedural paper backgrounds");
  b->add_option("--out", bg.out, "Output directory")->required();
  b->add_option("--count", bg.count, "Number of images")->capture_default_str();
  b->add_option("--seed", bg.seed, "Seed")->capture_default_str();
  b->add_option("--height", bg.height, "Height in pixels")->capture_default_str();
  b->add_option("--width", bg.width, "Width in pixels")->capture_default_str();
  b->callback([&] { action = [&] { run_backgrounds(bg); }; });

  SyngenArgs sg;
  auto* s = app.add_subcommand("syngen", "Render a synthetic line dataset");
  s->add_option("--seed", sg.seed, "Dataset seed")->capture_default_str();
  s->add_option("--count", sg.count, "Number of items")->capture_default_str();
  s->add_option("--out", sg.out, "Output directory")->required();
  s->add_option("--fonts", sg.fonts, "Font directory")->capture_default_str();
  s->add_option("--backgrounds", sg.backgrounds, "Background directory")->capture_default_str();
  s->add_option("--corpus", sg.corpus, "Word pool text file (default: $HATFORMER_ARABIC_CORPUS or built-in)");
  s->add_option("--min-words", sg.min_words, "Fewest words per line")->capture_default_str();
  s->add_option("--max-words", sg.max_words, "Most words per line")->capture_default_str();
  s->add_option("--min-font-px", sg.min_font_px, "Smallest font size")->capture_default_str();
  s->add_option("--max-font-px", sg.max_font_px, "Largest font size")->capture_default_str();
  s->add_option("--augmentation", sg.augmentation, "Use only this augmentation id");
  s->add_option("--threads", sg.threads, "Worker threads")->capture_default_str();
  s->callback([&] { action = [&] { run_syngen(sg); }; });

  BlockprocArgs bp;
  auto* k = app.add_subcommand("blockproc", "Pack a line image into the 384x384 canvas, or unpack one");
  k->add_option("--in", bp.in, "Input PNG")->required()->check(CLI::ExistingFile);
  k->add_option("--out", bp.out, "Output PNG")->required();
  k->add_option("--meta", bp.meta, "Geometry sidecar (default: output or input path with .json)");
  k->add_option("--row-height", bp.row_height, "Row height in pixels")->capture_default_str();
  k->add_flag("--naive", bp.naive, "Stretch to 384x384 instead of blocking");
  k->add_flag("--unpack", bp.unpack, "Recover the strip from a canvas PNG and its sidecar");
  k->callback([&] { action = [&] { run_blockproc(bp); }; });

  auto* t = app.add_subcommand("tokenizer", "Byte-level BPE tables");
  t->require_subcommand(1);
  TokTrainArgs tt;
  auto* tt_cmd = t->add_subcommand("train", "Learn a merge table");
  tt_cmd->add_option("--corpus", tt.corpora, "Corpus text file(s)")->required()->check(CLI::ExistingFile);
  tt_cmd->add_option("--vocab-size", tt.vocab_size, "Vocabulary size including bytes and specials")->capture_default_str();
  tt_cmd->add_option("--min-pair-count", tt.min_pair_count, "Rarest pair that may merge")->capture_default_str();
  tt_cmd->add_option("--out", tt.out, "Output table JSON")->required();
  tt_cmd->callback([&] { action = [&] { run_tok_train(tt); }; });
  TokCodecArgs tc;
  auto* te = t->add_subcommand("encode", "Text to token ids");
  te->add_option("--table", tc.table, "Merge table JSON")->required()->check(CLI::ExistingFile);
  auto* text_opt = te->add_option("--text", tc.text, "Text to encode");
  te->add_option("--in", tc.in, "File to encode")->check(CLI::ExistingFile)->excludes(text_opt);
  te->callback([&] { action = [&] { run_tok_encode(tc); }; });
  auto* td = t->add_subcommand("decode", "Token ids to text");
  td->add_option("--table", tc.table, "Merge table JSON")->required()->check(CLI::ExistingFile);
  td->add_option("--ids", tc.ids, "Ids separated by spaces or commas")->required();
  td->callback([&] { action = [&] { run_tok_decode(tc); }; });
  TokRatioArgs tr;
  auto* tq = t->add_subcommand("ratio", "Token count of a corpus under base / custom tables");
  tq->add_option("--base", tr.base, "Base table")->required()->check(CLI::ExistingFile);
  tq->add_option("--custom", tr.custom, "Custom table")->required()->check(CLI::ExistingFile);
  tq->add_option("--corpus", tr.corpus, "Held-out text")->required()->check(CLI::ExistingFile);
  tq->callback([&] { action = [&] { run_tok_ratio(tr); }; });

  ScoreArgs sc;
  auto* e = app.add_subcommand("score", "Character error rate under a normalization policy");
  e->add_option("--ref", sc.ref, "Reference lines")->check(CLI::ExistingFile);
  e->add_option("--pred", sc.pred, "Prediction lines")->check(CLI::ExistingFile);
  e->add_option("--records", sc.records, "Re-score an eval.jsonl")->check(CLI::ExistingFile);
  e->add_option("--out", sc.out, "Write scored records here");
  e->add_option("--policy", sc.policy, "Policy JSON file")->check(CLI::ExistingFile);
  e->add_option("--tables", sc.tables, "Directory with replacement tables")->check(CLI::ExistingDirectory);
  e->add_flag("--collapse-ws", sc.collapse_ws, "Collapse whitespace runs");
  e->add_flag("--remove-diacritics", sc.remove_diacritics, "Remove diacritics");
  e->add_flag("--replace-nc", sc.replace_nc, "Replace without context");
  e->add_flag("--replace-wc", sc.replace_wc, "Replace with context");
  e->add_flag("--per-line", sc.per_line, "Mean of line CERs instead of the corpus aggregate");
  e->callback([&] { action = [&] { run_score(sc); }; });

  TrainArgs ta;
  auto* r = app.add_subcommand("train", "Run one training stage");
  r->add_option("--stage", ta.stage, "1 (synthetic) or 2 (fine-tune)")->required()->check(CLI::IsMember({1, 2}));
  r->add_option("--data", ta.data, "Dataset manifest.jsonl")->required()->check(CLI::ExistingFile);
  r->add_option("--config", ta.config, "JSON: stage fields plus optional model and decode objects")
      ->check(CLI::ExistingFile);
  r->add_option("--out", ta.out, "Run directory")->required();
  r->add_option("--tokenizer", ta.tokenizer, "Merge table JSON")->required()->check(CLI::ExistingFile);
  r->add_option("--init", ta.init, "Start from this checkpoint")->check(CLI::ExistingFile);
  r->add_flag("--train-time-normalize", ta.train_time_normalize, "Collapse whitespace in training labels");
  r->add_option("--max-steps", ta.max_steps, "Override max_steps");
  r->add_option("--eval-every", ta.eval_every, "Override eval_every");
  r->callback([&] { action = [&] { run_train(ta); }; });

  RecognizeArgs ra;
  auto* g = app.add_subcommand("recognize", "Decode line images with a checkpoint");
  g->add_option("--checkpoint", ra.checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  g->add_option("--tokenizer", ra.tokenizer, "Merge table (default: tokenizer.json beside the checkpoint)");
  auto* img_opt = g->add_option("--image", ra.image, "One line image")->check(CLI::ExistingFile);
  g->add_option("--data", ra.data, "Dataset manifest.jsonl")->check(CLI::ExistingFile)->excludes(img_opt);
  g->add_option("--split", ra.split, "train, val, test or all")
      ->check(CLI::IsMember({"train", "val", "test", "all"}))
      ->capture_default_str();
  g->add_option("--out", ra.out, "Run directory for --data");
  g->add_option("--beam", ra.beam, "Beam width")->capture_default_str();
  g->add_option("--length-penalty", ra.length_penalty, "Length penalty alpha")->capture_default_str();
  g->add_option("--max-len", ra.max_len, "Longest output in tokens")->capture_default_str();
  g->add_flag("--emit-attention", ra.emit_attention, "Store cross-attention traces");
  g->callback([&] { action = [&] { run_recognize(ra); }; });

  ServeArgs sv;
  auto* v = app.add_subcommand("serve", "Serve a run directory over HTTP");
  v->add_option("--run-dir", sv.run_dir, "Run directory (default: $HATFORMER_RUN_DIR)");
  v->add_option("--host", sv.host, "Bind address")->capture_default_str();
  v->add_option("--port", sv.port, "Port (0 = any free port)")->capture_default_str();
  v->add_option("--static", sv.static_dir, "Static UI files served at /")->check(CLI::ExistingDirectory);
  v->callback([&] { action = [&] { run_serve(sv); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForVersion& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    fail("usage", ex.what());
    return 2;
  }
  try {
    action();
  } catch (const Error& ex) {
    fail(ex.kind(), ex.what());
    return 1;
  } catch (const json::exception& ex) {
    fail("config_error", ex.what());
    return 1;
  } catch (const std::exception& ex) {
    fail("internal", ex.what());
    return 1;
  }
  return 0;
}
