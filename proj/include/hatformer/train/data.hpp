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

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "hatformer/eval/normalize.hpp"
#include "hatformer/imaging/png_io.hpp"
#include "hatformer/model/transformer.hpp"
#include "hatformer/synth/dataset.hpp"
#include "hatformer/tokenizer/bbpe.hpp"

namespace hatformer::train {

using bbpe::TokenId;

/// Lines of one split, ready for the model.
struct LineSet {
  std::vector<model::Example> examples;
  std::vector<std::string> ids;
  std::vector<std::string> texts;
  /// Image paths relative to the manifest directory.
  std::vector<std::string> images;

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }
};

struct LoadOptions {
  /// Labels longer than this (in tokens, plus </s>) are skipped.
  int max_decode_len = 128;
  bool collapse_whitespace = false;
  std::function<void(const std::string&)> log;
};

inline model::Example make_example(const LineImage& img, const std::string& text, const bbpe::MergeTable& table,
                                   bool collapse_ws) {
  model::Example ex;
  ex.canvas = block_pack(img);
  eval::NormalizationPolicy ws;
  ws.collapse_whitespace = true;
  const auto label = collapse_ws ? eval::apply(ws, text) : text;
  ex.label = bbpe::encode(table, label);
  return ex;
}

/// Loads the entries of `split` from a dataset manifest.
inline LineSet load_split(const std::filesystem::path& manifest, synth::Split split, const bbpe::MergeTable& table,
                          const LoadOptions& opts = {}) {
  const auto dir = manifest.parent_path();
  LineSet out;
  for (const auto& e : synth::read_manifest(manifest)) {
    if (e.split != split) continue;
    auto ex = make_example(load_png(dir / e.image), e.text, table, opts.collapse_whitespace);
    if (static_cast<int>(ex.label.size()) + 1 > opts.max_decode_len) {
      if (opts.log) {
        opts.log("skipping " + e.image + ": " + std::to_string(ex.label.size()) + " tokens exceed max_decode_len " +
                 std::to_string(opts.max_decode_len));
      }
      continue;
    }
    out.examples.push_back(std::move(ex));
    out.ids.push_back(std::filesystem::path(e.image).stem().string());
    out.texts.push_back(e.text);
    out.images.push_back(e.image);
  }
  return out;
}

}  // namespace hatformer::train
