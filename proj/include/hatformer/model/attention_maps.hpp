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

// Attention rollout and cross-attention heatmaps, on the patch grid and
// mapped back to strip coordinates for overlays.
//
// Token indices follow the encoder sequence: 0 is the class token and patch
// p (row-major on the grid) is token p + 1.

#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hatformer/model/transformer.hpp"

namespace hatformer::model {

using MatD = Mat<double>;

struct Heatmap {
  int grid = 0;
  /// grid x grid patch weights, row-major.
  std::vector<double> patches;
  double cls = 0.0;

  double total() const {
    double s = cls;
    for (double v : patches) s += v;
    return s;
  }
  int argmax_patch() const {
    return static_cast<int>(std::max_element(patches.begin(), patches.end()) - patches.begin());
  }
};

namespace detail {

template <class T>
MatD head_mean(const std::vector<Mat<T>>& heads) {
  if (heads.empty()) throw ValidationError("attention trace has a layer without heads");
  MatD m = heads[0].template cast<double>();
  for (std::size_t h = 1; h < heads.size(); ++h) m += heads[h].template cast<double>();
  return m / static_cast<double>(heads.size());
}

inline Heatmap to_heatmap(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  const auto n = row.size() - 1;
  Heatmap h;
  h.grid = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
  if (static_cast<Eigen::Index>(h.grid) * h.grid != n) throw ValidationError("attention row is not a square patch grid plus class token");
  h.cls = row(0);
  h.patches.assign(row.data() + 1, row.data() + row.size());
  return h;
}

}  // namespace detail

/// Cumulative rollout matrix: per layer the head-mean attention A is mixed
/// with the identity as 0.5 A + 0.5 I, rows renormalized, and the result
/// left-multiplies the running product.
template <class T>
MatD rollout_matrix(const AttentionTrace<T>& trace) {
  if (trace.encoder_self.empty()) throw ValidationError("attention trace has no encoder layers");
  MatD r;
  for (const auto& layer : trace.encoder_self) {
    MatD a = detail::head_mean(layer);
    if (a.rows() != a.cols()) throw ValidationError("encoder self-attention must be square");
    a = 0.5 * a + 0.5 * MatD::Identity(a.rows(), a.cols());
    const Eigen::VectorXd sums = a.rowwise().sum();
    a = sums.cwiseInverse().asDiagonal() * a;
    r = r.size() == 0 ? a : MatD(a * r);
  }
  return r;
}

template <class T>
Heatmap attention_rollout(const AttentionTrace<T>& trace, int token_index) {
  const MatD r = rollout_matrix(trace);
  if (token_index < 0 || token_index >= r.rows()) {
    throw ValidationError("token index " + std::to_string(token_index) + " outside [0, " + std::to_string(r.rows()) + ")");
  }
  return detail::to_heatmap(r.row(token_index));
}

/// Head-averaged cross-attention of decoder position `position`, from the
/// given decoder layer (default: the last).
template <class T>
Heatmap cross_attention_map(const AttentionTrace<T>& trace, int position, int layer = -1) {
  if (trace.decoder_cross.empty()) throw ValidationError("attention trace has no decoder layers");
  const int n_layers = static_cast<int>(trace.decoder_cross.size());
  if (layer < 0) layer += n_layers;
  if (layer < 0 || layer >= n_layers) throw ValidationError("decoder layer out of range");
  const MatD a = detail::head_mean(trace.decoder_cross[static_cast<std::size_t>(layer)]);
  if (position < 0 || position >= a.rows()) {
    throw ValidationError("token position " + std::to_string(position) + " outside [0, " + std::to_string(a.rows()) + ")");
  }
  return detail::to_heatmap(a.row(position));
}

/// Paints each patch weight over its canvas pixels and maps them back to
/// the strip (row_height x strip_width_px, original orientation). A
/// stretched canvas has no strip, so the overlay is the canvas itself.
inline LineImage heatmap_to_strip(const Heatmap& h, const BlockCanvas& canvas) {
  canvas.validate();
  const int patch = BlockCanvas::kSize / h.grid;
  if (patch * h.grid != BlockCanvas::kSize) throw ValidationError("heatmap grid does not tile the canvas");
  const int out_h = canvas.stretched ? BlockCanvas::kSize : canvas.row_height;
  const int out_w = canvas.stretched ? BlockCanvas::kSize : canvas.strip_width_px;
  LineImage out(out_h, out_w);
  for (int r = 0; r < BlockCanvas::kSize; ++r) {
    for (int c = 0; c < BlockCanvas::kSize; ++c) {
      const auto s = canvas.to_strip(r, c);
      if (!s) continue;
      out.at(s->first, s->second) = static_cast<float>(h.patches[static_cast<std::size_t>((r / patch) * h.grid + c / patch)]);
    }
  }
  return out;
}

inline nlohmann::json to_json(const Heatmap& h) {
  return {{"grid", h.grid}, {"cls", h.cls}, {"patches", h.patches}};
}

}  // namespace hatformer::model
