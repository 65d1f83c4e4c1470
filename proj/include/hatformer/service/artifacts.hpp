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
 * @file artifacts.hpp
 * @brief Per-line attention traces as stored in a run directory.
 *
 * A trace file holds, for every decoded position (each output token and the
 * final end token), the head-averaged last-layer cross-attention over the
 * patch grid, together with the canvas metadata needed to map patches back
 * to strip pixels. The class-token rollout row is stored once.
 */

#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hatformer/model/attention_maps.hpp"
#include "hatformer/tokenizer/bbpe.hpp"

namespace hatformer::service {

inline constexpr std::string_view kAttentionSchema = "hatformer.attention/1";

struct AttentionArtifact {
  /// Only the geometry fields are stored; loaded canvases have blank pixels.
  BlockCanvas canvas;
  std::vector<bbpe::TokenId> tokens;  // output tokens, end token last
  std::vector<std::string> pieces;
  std::vector<model::Heatmap> cross;  // one per output token
  model::Heatmap rollout_cls;
};

/// Re-runs the decoder teacher-forced on `tokens` (without the end token)
/// to collect the attention of the recognized sequence.
template <class T>
AttentionArtifact trace_recognition(const model::ModelParams<T>& p, const BlockCanvas& canvas,
                                    std::span<const bbpe::TokenId> tokens, const bbpe::MergeTable& table) {
  model::AttentionTrace<T> trace;
  const auto memory = model::encode_canvas(canvas, p, nullptr, &trace);
  std::vector<bbpe::TokenId> inputs{bbpe::kBos};
  inputs.insert(inputs.end(), tokens.begin(), tokens.end());
  if (static_cast<int>(inputs.size()) > p.config.max_decode_len) inputs.resize(static_cast<std::size_t>(p.config.max_decode_len));
  model::decode_logits(memory, inputs, p, nullptr, &trace);

  AttentionArtifact a;
  a.canvas = canvas;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    const bool end = t >= tokens.size();
    const auto id = end ? bbpe::kEos : tokens[t];
    a.tokens.push_back(id);
    a.pieces.push_back(end ? "</s>" : bbpe::decode(table, std::span(&tokens[t], 1)));
    a.cross.push_back(model::cross_attention_map(trace, static_cast<int>(t)));
  }
  a.rollout_cls = model::attention_rollout(trace, 0);
  return a;
}

inline nlohmann::json to_json(const AttentionArtifact& a) {
  nlohmann::json cross = nlohmann::json::array();
  for (const auto& h : a.cross) cross.push_back(model::to_json(h));
  return {{"schema", kAttentionSchema},
          {"canvas",
           {{"row_height", a.canvas.row_height},
            {"strip_width_px", a.canvas.strip_width_px},
            {"rows_used", a.canvas.rows_used},
            {"lossy", a.canvas.lossy},
            {"stretched", a.canvas.stretched}}},
          {"tokens", a.tokens},
          {"pieces", a.pieces},
          {"cross", cross},
          {"rollout_cls", model::to_json(a.rollout_cls)}};
}

inline model::Heatmap heatmap_from_json(const nlohmann::json& j) {
  model::Heatmap h;
  h.grid = j.at("grid").get<int>();
  h.cls = j.at("cls").get<double>();
  h.patches = j.at("patches").get<std::vector<double>>();
  if (h.grid < 1 || h.patches.size() != static_cast<std::size_t>(h.grid) * static_cast<std::size_t>(h.grid)) {
    throw ValidationError("heatmap size does not match its grid");
  }
  return h;
}

inline AttentionArtifact attention_from_json(const nlohmann::json& j) {
  if (j.value("schema", std::string{}) != kAttentionSchema) throw ValidationError("unsupported attention schema");
  try {
    AttentionArtifact a;
    const auto& c = j.at("canvas");
    a.canvas.row_height = c.at("row_height").get<int>();
    a.canvas.strip_width_px = c.at("strip_width_px").get<int>();
    a.canvas.rows_used = c.at("rows_used").get<int>();
    a.canvas.lossy = c.at("lossy").get<bool>();
    a.canvas.stretched = c.at("stretched").get<bool>();
    a.tokens = j.at("tokens").get<std::vector<bbpe::TokenId>>();
    a.pieces = j.at("pieces").get<std::vector<std::string>>();
    for (const auto& h : j.at("cross")) a.cross.push_back(heatmap_from_json(h));
    a.rollout_cls = heatmap_from_json(j.at("rollout_cls"));
    if (a.tokens.size() != a.cross.size() || a.pieces.size() != a.cross.size()) {
      throw ValidationError("attention trace lists disagree in length");
    }
    a.canvas.validate();
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed attention trace: ") + e.what());
  }
}

inline void save_attention(const AttentionArtifact& a, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json(a).dump() << '\n';
}

inline AttentionArtifact load_attention(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return attention_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("malformed attention trace: ") + e.what());
  }
}

}  // namespace hatformer::service
