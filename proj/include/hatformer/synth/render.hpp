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
 * @file render.hpp
 * @brief SynthSpec sampling and line rendering.
 *
 * render() draws the shaped line in black on a padded white layer, applies
 * an ink-layer augmentation if one was chosen, crops to the ink with a small
 * margin, composites onto a crop of the paper background and finally applies
 * a whole-image augmentation if one was chosen.
 *
 * Random draws come from three independent counter streams:
 *   - the spec itself:      (seed, index, 0)
 *   - layout (font size, ink tone, margins, background crop): keyed on the
 *     label, font and background only, so with the identity augmentation
 *     the pixels are a function of those three
 *   - augmentation parameters: (seed, index, 2)
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <opencv2/core.hpp>
#include <opencv2/freetype.hpp>
#include <opencv2/imgproc.hpp>

#include "hatformer/error.hpp"
#include "hatformer/imaging/line_image.hpp"
#include "hatformer/rng.hpp"
#include "hatformer/synth/arabic_shaping.hpp"
#include "hatformer/synth/augment.hpp"
#include "hatformer/synth/pools.hpp"

namespace hatformer::synth {

struct SynthSpec {
  std::uint64_t seed = 0;
  std::uint64_t index = 0;
  int word_count = 0;
  std::vector<std::string> words;
  int font_id = 0;
  int background_id = 0;
  int augmentation_id = 0;

  std::string text() const {
    std::string s;
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (i) s += ' ';
      s += words[i];
    }
    return s;
  }

  friend bool operator==(const SynthSpec&, const SynthSpec&) = default;
};

inline nlohmann::json to_json(const SynthSpec& s) {
  return {{"seed", s.seed},       {"index", s.index},           {"word_count", s.word_count},
          {"words", s.words},     {"font_id", s.font_id},       {"background_id", s.background_id},
          {"augmentation_id", s.augmentation_id}};
}

inline SynthSpec spec_from_json(const nlohmann::json& j) {
  SynthSpec s;
  s.seed = j.at("seed").get<std::uint64_t>();
  s.index = j.at("index").get<std::uint64_t>();
  s.word_count = j.at("word_count").get<int>();
  s.words = j.at("words").get<std::vector<std::string>>();
  s.font_id = j.at("font_id").get<int>();
  s.background_id = j.at("background_id").get<int>();
  s.augmentation_id = j.at("augmentation_id").get<int>();
  if (s.word_count != static_cast<int>(s.words.size())) throw ValidationError("word_count does not match words");
  return s;
}

struct SynthConfig {
  int min_words = 1;
  int max_words = 20;
  int min_font_px = 36;
  int max_font_px = 56;
  /// Restricts augmentation_id to this value when set (0 = identity).
  std::optional<int> fixed_augmentation;
  /// Also report each word's bounding box (costs one extra layout per word).
  bool word_boxes = false;

  void validate() const {
    if (min_words < 1 || max_words > 20 || min_words > max_words) {
      throw ConfigError("word counts must satisfy 1 <= min_words <= max_words <= 20");
    }
    if (min_font_px < 8 || min_font_px > max_font_px) throw ConfigError("invalid font size range");
    if (fixed_augmentation) augmentation_from_id(*fixed_augmentation);
  }
};

inline SynthSpec sample_spec(std::uint64_t seed, std::uint64_t index, const AssetPools& pools,
                             const SynthConfig& config = {}) {
  pools.validate();
  config.validate();
  CounterRng rng(seed, index, 0);
  SynthSpec s;
  s.seed = seed;
  s.index = index;
  s.word_count = static_cast<int>(rng.uniform_int(config.min_words, config.max_words));
  for (int i = 0; i < s.word_count; ++i) s.words.push_back(pools.corpus.sample(rng));
  s.font_id = static_cast<int>(rng.uniform_int(0, static_cast<std::int64_t>(pools.fonts.size()) - 1));
  s.background_id = static_cast<int>(rng.uniform_int(0, static_cast<std::int64_t>(pools.backgrounds.size()) - 1));
  const int aug = static_cast<int>(rng.uniform_int(0, kNumAugmentations - 1));
  s.augmentation_id = config.fixed_augmentation.value_or(aug);
  return s;
}

/// Raised when one item cannot be rendered; dataset generation skips it.
class RenderError : public Error {
public:
  explicit RenderError(const std::string& what) : Error("render_error", what) {}
};

struct WordBox {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
};

struct RenderedLine {
  LineImage image;
  std::string text;
  /// One box per word, in logical order, in image coordinates. Boxes are
  /// measured before any ink-layer augmentation.
  std::vector<WordBox> word_boxes;
};

namespace detail {

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xCBF29CE484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

inline cv::Mat to_mat(const LineImage& img) {
  cv::Mat m(img.height, img.width, CV_32F);
  std::copy(img.pixels.begin(), img.pixels.end(), m.ptr<float>(0));
  return m;
}

inline LineImage from_mat(const cv::Mat& m) {
  CV_Assert(m.type() == CV_32F && m.isContinuous());
  LineImage img(m.rows, m.cols);
  std::copy(m.ptr<float>(0), m.ptr<float>(0) + img.pixels.size(), img.pixels.begin());
  return img;
}

// Crop of the background at (y, x), mirrored-tiled if the paper is smaller.
inline cv::Mat paper_crop(const LineImage& paper, int h, int w, CounterRng& rng) {
  const cv::Mat src = to_mat(paper);
  cv::Mat tiled = src;
  if (src.rows < h || src.cols < w) {
    const int pad_y = std::max(0, h - src.rows), pad_x = std::max(0, w - src.cols);
    cv::copyMakeBorder(src, tiled, 0, pad_y, 0, pad_x, cv::BORDER_REFLECT_101);
  }
  const int y = static_cast<int>(rng.uniform_int(0, tiled.rows - h));
  const int x = static_cast<int>(rng.uniform_int(0, tiled.cols - w));
  return tiled(cv::Rect(x, y, w, h)).clone();
}

}  // namespace detail

/// Renders `spec` into a line image (ink coverage) and its ground truth.
inline RenderedLine render(const SynthSpec& spec, const AssetPools& pools, const SynthConfig& config = {}) {
  pools.validate();
  if (spec.words.empty() || spec.word_count != static_cast<int>(spec.words.size())) {
    throw ValidationError("spec must carry word_count = |words| >= 1");
  }
  if (spec.font_id < 0 || spec.font_id >= static_cast<int>(pools.fonts.size()) || spec.background_id < 0 ||
      spec.background_id >= static_cast<int>(pools.backgrounds.size())) {
    throw ValidationError("spec refers to a font or background outside the pools");
  }
  const Augmentation aug = augmentation_from_id(spec.augmentation_id);
  const auto& font = pools.fonts[static_cast<std::size_t>(spec.font_id)];
  const std::string text = spec.text();
  const auto logical = utf8::decode(text);
  if (const auto missing = font.coverage.missing(required_code_points(logical)); !missing.empty()) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "U+%04X", static_cast<unsigned>(missing.front()));
    throw RenderError("font '" + font.name + "' has no glyph for " + buf + " (" + std::to_string(missing.size()) +
                      " missing)");
  }

  CounterRng layout(detail::fnv1a(text), static_cast<std::uint64_t>(spec.font_id),
                    1000 + static_cast<std::uint64_t>(spec.background_id));
  CounterRng aug_rng(spec.seed, spec.index, 2);

  const int font_px = static_cast<int>(layout.uniform_int(config.min_font_px, config.max_font_px));
  const std::string visual = utf8::encode(shape_visual(logical));

  auto ft = cv::freetype::createFreeType2();
  try {
    ft->loadFontData(font.path.string(), 0);
  } catch (const cv::Exception& e) {
    throw RenderError("cannot load font '" + font.name + "': " + e.what());
  }
  int baseline = 0;
  const cv::Size size = ft->getTextSize(visual, font_px, -1, &baseline);
  const int margin = font_px;
  cv::Mat layer(size.height + baseline + 2 * margin, size.width + 2 * margin, CV_8UC3, cv::Scalar::all(255));
  ft->putText(layer, visual, cv::Point(margin, margin + size.height), font_px, cv::Scalar::all(0), -1, cv::LINE_AA,
              true);
  auto ink_of = [](const cv::Mat& bgr) {
    cv::Mat gray, ink;
    cv::cvtColor(bgr, gray, cv::COLOR_BGR2GRAY);
    gray.convertTo(ink, CV_32F, -1.0 / 255.0, 1.0);
    return ink;
  };
  cv::Mat ink = ink_of(layer);

  // The visual string of the last m+1 words is a left-aligned prefix of the
  // full visual string, so rendering it at the same origin isolates word
  // n-1-m as the newly inked pixels.
  std::vector<cv::Rect> boxes;
  if (config.word_boxes) {
    const auto n = spec.words.size();
    boxes.resize(n);
    cv::Mat previous = cv::Mat::zeros(layer.size(), CV_8U);
    for (std::size_t m = 0; m < n; ++m) {
      std::string tail;
      for (std::size_t k = n - 1 - m; k < n; ++k) {
        if (k != n - 1 - m) tail += ' ';
        tail += spec.words[k];
      }
      cv::Mat part(layer.size(), CV_8UC3, cv::Scalar::all(255));
      ft->putText(part, shape_visual(std::string_view(tail)), cv::Point(margin, margin + size.height), font_px,
                  cv::Scalar::all(0), -1, cv::LINE_AA, true);
      cv::Mat mask;
      cv::threshold(ink_of(part), mask, 0.1, 255, cv::THRESH_BINARY);
      mask.convertTo(mask, CV_8U);
      cv::Mat fresh;
      cv::bitwise_and(mask, ~previous, fresh);
      boxes[n - 1 - m] = cv::boundingRect(fresh);
      previous = mask;
    }
  }

  if (acts_on_ink_layer(aug)) ink = augment(ink, aug, aug_rng);

  cv::Mat mask;
  cv::threshold(ink, mask, 0.1, 1.0, cv::THRESH_BINARY);
  mask.convertTo(mask, CV_8U);
  const cv::Rect bbox = cv::boundingRect(mask);
  if (bbox.area() == 0) throw RenderError("blank render for '" + text + "'");
  const int pad_x = static_cast<int>(layout.uniform_int(4, std::max(4, font_px / 3)));
  const int pad_y = static_cast<int>(layout.uniform_int(2, std::max(2, font_px / 5)));
  const cv::Rect crop = cv::Rect(bbox.x - pad_x, bbox.y - pad_y, bbox.width + 2 * pad_x, bbox.height + 2 * pad_y) &
                        cv::Rect(0, 0, ink.cols, ink.rows);
  const cv::Mat line_ink = ink(crop).clone();

  const double strength = layout.uniform(0.75, 0.95);
  const cv::Mat paper =
      detail::paper_crop(pools.backgrounds[static_cast<std::size_t>(spec.background_id)].image, line_ink.rows,
                         line_ink.cols, layout);
  // coverage = 1 - (1 - paper) * (1 - strength * ink)
  cv::Mat out = 1.0 - (1.0 - paper).mul(1.0 - strength * line_ink);

  if (!acts_on_ink_layer(aug)) out = augment(out, aug, aug_rng);
  cv::min(out, 1.0, out);
  cv::max(out, 0.0, out);
  RenderedLine result{detail::from_mat(out), text, {}};
  for (const auto& b : boxes) {
    const cv::Rect r = (b - crop.tl()) & cv::Rect(0, 0, out.cols, out.rows);
    result.word_boxes.push_back({r.x, r.y, r.width, r.height});
  }
  return result;
}

}  // namespace hatformer::synth
