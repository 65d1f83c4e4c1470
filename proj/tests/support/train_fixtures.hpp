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

#include <string>
#include <vector>

#include "hatformer/train/trainer.hpp"

namespace hatformer::testing {

/// A fast model for loop tests: 32-pixel patches, one layer each side.
inline model::ModelConfig loop_config() {
  model::ModelConfig c;
  c.patch_size = 32;
  c.d_model = 16;
  c.n_heads = 2;
  c.n_enc_layers = 1;
  c.n_dec_layers = 1;
  c.d_ff = 32;
  c.vocab_size = bbpe::kFirstMergeId;
  c.max_decode_len = 8;
  return c;
}

/// Draws ASCII text as bar codes: each character is a 32-pixel cell whose
/// bars encode its byte value.
inline LineImage toy_line(const std::string& text) {
  LineImage img(64, 32 * static_cast<int>(std::max<std::size_t>(text.size(), 1)));
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto b = static_cast<unsigned char>(text[i]);
    for (int bit = 0; bit < 8; ++bit) {
      if (!((b >> bit) & 1)) continue;
      for (int r = 8 * bit; r < 8 * bit + 6; ++r) {
        for (int c = 4; c < 28; ++c) img.at(r, static_cast<int>(32 * i) + c) = 1.0f;
      }
    }
  }
  return img;
}

inline train::LineSet toy_set(const std::vector<std::string>& texts, const bbpe::MergeTable& table) {
  train::LineSet s;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    s.examples.push_back(train::make_example(toy_line(texts[i]), texts[i], table, false));
    s.ids.push_back("line" + std::to_string(i));
    s.texts.push_back(texts[i]);
    s.images.push_back("line" + std::to_string(i) + ".png");
  }
  return s;
}

}  // namespace hatformer::testing
