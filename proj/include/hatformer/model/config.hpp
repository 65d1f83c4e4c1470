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

#include <nlohmann/json.hpp>

#include "hatformer/error.hpp"

namespace hatformer::model {

struct ModelConfig {
  int image_size = 384;
  int patch_size = 16;
  int d_model = 128;
  int n_heads = 4;
  int n_enc_layers = 4;
  int n_dec_layers = 4;
  /// MLP hidden width; 0 means 4 * d_model.
  int d_ff = 0;
  int vocab_size = 0;
  /// Decoder positions, counting the start token.
  int max_decode_len = 128;

  int grid() const { return image_size / patch_size; }
  int n_patches() const { return grid() * grid(); }
  int n_tokens() const { return n_patches() + 1; }
  int patch_dim() const { return patch_size * patch_size; }
  int head_dim() const { return d_model / n_heads; }
  int ff_dim() const { return d_ff > 0 ? d_ff : 4 * d_model; }

  void validate() const {
    if (image_size < 1 || patch_size < 1 || image_size % patch_size != 0) {
      throw ConfigError("image_size must be a positive multiple of patch_size");
    }
    if (d_model < 1 || n_heads < 1 || d_model % n_heads != 0) {
      throw ConfigError("d_model must be a positive multiple of n_heads");
    }
    if (n_enc_layers < 1 || n_dec_layers < 1) throw ConfigError("layer counts must be positive");
    if (d_ff < 0) throw ConfigError("d_ff must be non-negative");
    if (vocab_size < 260) throw ConfigError("vocab_size must cover the 256 bytes and 4 special tokens");
    if (max_decode_len < 2) throw ConfigError("max_decode_len must be at least 2");
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline nlohmann::json to_json(const ModelConfig& c) {
  return {{"image_size", c.image_size},     {"patch_size", c.patch_size},     {"d_model", c.d_model},
          {"n_heads", c.n_heads},           {"n_enc_layers", c.n_enc_layers}, {"n_dec_layers", c.n_dec_layers},
          {"d_ff", c.d_ff},                 {"vocab_size", c.vocab_size},     {"max_decode_len", c.max_decode_len}};
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (!v.is_number_integer()) throw ConfigError("model config field '" + k + "' must be an integer");
    const int x = v.get<int>();
    if (k == "image_size") c.image_size = x;
    else if (k == "patch_size") c.patch_size = x;
    else if (k == "d_model") c.d_model = x;
    else if (k == "n_heads") c.n_heads = x;
    else if (k == "n_enc_layers") c.n_enc_layers = x;
    else if (k == "n_dec_layers") c.n_dec_layers = x;
    else if (k == "d_ff") c.d_ff = x;
    else if (k == "vocab_size") c.vocab_size = x;
    else if (k == "max_decode_len") c.max_decode_len = x;
    else throw ConfigError("unknown model config field '" + k + "'");
  }
  return c;
}

}  // namespace hatformer::model
