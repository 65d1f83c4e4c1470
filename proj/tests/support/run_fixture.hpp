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

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "hatformer/imaging/png_io.hpp"
#include "hatformer/service/artifacts.hpp"
#include "support/train_fixtures.hpp"

namespace hatformer::testing {

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto d = std::filesystem::temp_directory_path() / ("hatformer_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

/// Reference / prediction pairs that every normalization tier changes.
inline std::vector<std::pair<std::string, std::string>> policy_pairs() {
  return {
      {"قَالَ  الرجل", "قال الرجل"},
      {"إلى المدينة", "الى المدينه"},
      {"مسؤول عن القرية", "مسءول  عن القريه"},
      {"أَحْمَد", "احمد"},
      {"على", "علي"},
      {"كتاب", "كتاب"},
      {"في البيت", ""},
      {"ٱلكِتَابُ", "الكتاب"},
  };
}

/// A complete run directory: eval.jsonl, images, meta.json and one
/// attention trace (for the first record) from a small random model.
inline std::filesystem::path make_run_dir(const std::string& name) {
  const auto dir = scratch_dir(name);
  std::filesystem::create_directories(dir / "images");
  std::filesystem::create_directories(dir / "attention");
  const auto pairs = policy_pairs();
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < pairs.size(); ++i) ids.push_back("r" + std::to_string(i));
  auto score = eval::score_corpus(pairs, train::default_scoring_policy(), eval::Aggregation::kCorpus, ids);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto line = toy_line(std::string(3 + i, 'a'));
    save_png(line, dir / "images" / (ids[i] + ".png"));
    score.records[i].image = "images/" + ids[i] + ".png";
  }
  const auto params = model::init_params<float>(loop_config(), 5);
  const auto canvas = block_pack(toy_line("abc"));
  const std::vector<bbpe::TokenId> tokens{'a', 'b', 'c'};
  service::save_attention(service::trace_recognition(params, canvas, std::span<const bbpe::TokenId>(tokens),
                                                     bbpe::MergeTable{}),
                          dir / "attention" / "r0.json");
  score.records[0].attention = "attention/r0.json";
  eval::write_jsonl(dir / "eval.jsonl", score.records);
  std::ofstream(dir / "meta.json") << R"({"split": "val", "lines": 8})";
  return dir;
}

}  // namespace hatformer::testing
