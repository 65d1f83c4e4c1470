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
 * @file line_image.hpp
 * @brief Text-line images and the blocked 384x384 encoder canvas.
 *
 * Intensities are ink coverage in [0, 1]: blank paper is 0 and full ink is 1,
 * so zero padding reads as empty paper. PNG loading converts luminance with
 * `1 - v / 255` (see png_io.hpp).
 *
 * The blocking transform turns a right-to-left text line into a square
 * canvas without distorting its aspect ratio:
 *
 *   flip -> scale to a 64 px high strip -> cut into 384 px segments ->
 *   stack segments top to bottom -> zero pad.
 *
 * For a 64 px high input no wider than 2304 px the transform is lossless and
 * block_unpack() restores the input bit for bit.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hatformer/error.hpp"

namespace hatformer {

/// A grayscale text-line strip, row-major.
struct LineImage {
  int height = 0;
  int width = 0;
  std::vector<float> pixels;

  LineImage() = default;
  LineImage(int h, int w, float fill = 0.0f) : height(h), width(w) {
    if (h < 1 || w < 1) {
      throw ValidationError("LineImage dimensions must be positive, got " +
                            std::to_string(h) + "x" + std::to_string(w));
    }
    pixels.assign(static_cast<std::size_t>(h) * static_cast<std::size_t>(w), fill);
  }

  float& at(int r, int c) { return pixels[static_cast<std::size_t>(r) * width + c]; }
  float at(int r, int c) const { return pixels[static_cast<std::size_t>(r) * width + c]; }

  void validate() const {
    if (height < 1 || width < 1) throw ValidationError("LineImage has non-positive dimensions");
    if (pixels.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width)) {
      throw ValidationError("LineImage pixel buffer does not match its dimensions");
    }
  }

  friend bool operator==(const LineImage&, const LineImage&) = default;
};

/// Geometry shared by block_pack / block_unpack and the attention overlays.
struct BlockGeometry {
  int canvas_size = 384;
  int row_height = 64;

  int max_rows() const { return canvas_size / row_height; }
  int max_strip_width() const { return canvas_size * max_rows(); }
  int rows_for(int strip_width) const { return (strip_width + canvas_size - 1) / canvas_size; }
};

/// A strip chunked into the square encoder container.
struct BlockCanvas {
  static constexpr int kSize = 384;

  int row_height = 64;
  int strip_width_px = 0;
  int rows_used = 0;
  /// Set when the strip was wider than the container and had to be
  /// compressed horizontally; block_unpack then returns the compressed strip.
  bool lossy = false;
  /// True for the aspect-ignoring baseline from naive_resize(); the whole
  /// container is then one stretched image and rows_used is fixed at 6.
  bool stretched = false;
  std::vector<float> pixels = std::vector<float>(kSize * kSize, 0.0f);

  BlockGeometry geometry() const { return {kSize, row_height}; }

  float& at(int r, int c) { return pixels[static_cast<std::size_t>(r) * kSize + c]; }
  float at(int r, int c) const { return pixels[static_cast<std::size_t>(r) * kSize + c]; }

  void validate() const {
    if (pixels.size() != static_cast<std::size_t>(kSize) * kSize) {
      throw ValidationError("BlockCanvas must hold 384x384 pixels");
    }
    if (row_height < 1 || row_height > kSize) {
      throw ValidationError("BlockCanvas row height out of range");
    }
    const auto g = geometry();
    if (stretched) {
      if (strip_width_px != kSize || rows_used != g.max_rows()) {
        throw ValidationError("stretched canvas must report strip width 384 and all rows used");
      }
      return;
    }
    if (strip_width_px < 1 || strip_width_px > g.max_strip_width()) {
      throw ValidationError("strip_width_px " + std::to_string(strip_width_px) +
                            " outside [1, " + std::to_string(g.max_strip_width()) + "]");
    }
    if (rows_used != g.rows_for(strip_width_px)) {
      throw ValidationError("rows_used " + std::to_string(rows_used) +
                            " inconsistent with strip_width_px " + std::to_string(strip_width_px));
    }
  }

  /// Maps a canvas pixel back to the unflipped strip, or nullopt for padding.
  std::optional<std::pair<int, int>> to_strip(int canvas_row, int canvas_col) const {
    if (stretched) return std::pair{canvas_row, canvas_col};
    const int block = canvas_row / row_height;
    if (block >= rows_used) return std::nullopt;
    const int flipped_x = block * kSize + canvas_col;
    if (flipped_x >= strip_width_px) return std::nullopt;
    return std::pair{canvas_row % row_height, strip_width_px - 1 - flipped_x};
  }

  friend bool operator==(const BlockCanvas&, const BlockCanvas&) = default;
};

/// Output column j is input column width-1-j.
inline LineImage flip_horizontal(const LineImage& img) {
  img.validate();
  LineImage out = img;
  for (int r = 0; r < img.height; ++r) {
    auto row = out.pixels.begin() + static_cast<std::ptrdiff_t>(r) * img.width;
    std::reverse(row, row + img.width);
  }
  return out;
}

namespace detail {

struct Tap {
  int lo;
  int hi;
  double w_hi;
};

// Half-pixel-centre sampling, clamped at the borders. When in == out every
// tap lands exactly on a source pixel with weight 0 on its neighbour.
inline std::vector<Tap> bilinear_taps(int in, int out) {
  std::vector<Tap> taps(static_cast<std::size_t>(out));
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (int i = 0; i < out; ++i) {
    double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const int lo = static_cast<int>(std::floor(src));
    const int hi = std::min(lo + 1, in - 1);
    taps[static_cast<std::size_t>(i)] = {lo, hi, src - lo};
  }
  return taps;
}

}  // namespace detail

/// Separable bilinear resize (horizontal pass, then vertical).
inline LineImage resize_bilinear(const LineImage& img, int out_h, int out_w) {
  img.validate();
  if (out_h < 1 || out_w < 1) throw ConfigError("resize target must be positive");
  if (out_h == img.height && out_w == img.width) return img;

  const auto xt = detail::bilinear_taps(img.width, out_w);
  const auto yt = detail::bilinear_taps(img.height, out_h);

  std::vector<double> tmp(static_cast<std::size_t>(img.height) * out_w);
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < out_w; ++c) {
      const auto& t = xt[static_cast<std::size_t>(c)];
      const double a = img.at(r, t.lo);
      const double b = img.at(r, t.hi);
      tmp[static_cast<std::size_t>(r) * out_w + c] = a + (b - a) * t.w_hi;
    }
  }
  LineImage out(out_h, out_w);
  for (int r = 0; r < out_h; ++r) {
    const auto& t = yt[static_cast<std::size_t>(r)];
    for (int c = 0; c < out_w; ++c) {
      const double a = tmp[static_cast<std::size_t>(t.lo) * out_w + c];
      const double b = tmp[static_cast<std::size_t>(t.hi) * out_w + c];
      out.at(r, c) = static_cast<float>(std::clamp(a + (b - a) * t.w_hi, 0.0, 1.0));
    }
  }
  return out;
}

/// Width after scaling to `target_h`, rounded half away from zero, min 1.
inline int scaled_width(int width, int height, int target_h) {
  const std::int64_t num = 2LL * width * target_h + height;
  return std::max<int>(1, static_cast<int>(num / (2LL * height)));
}

/// Rescales to `target_h` rows keeping the aspect ratio.
inline LineImage standardize_height(const LineImage& img, int target_h = 64) {
  if (target_h < 16 || target_h % 16 != 0) {
    throw ConfigError("target height must be a positive multiple of 16, got " +
                      std::to_string(target_h));
  }
  img.validate();
  if (img.height == target_h) return img;
  return resize_bilinear(img, target_h, scaled_width(img.width, img.height, target_h));
}

/// Flips, standardizes the height to `row_height` and stacks 384 px segments
/// of the strip top to bottom. Strips wider than the container are
/// compressed to exactly fit and flagged `lossy`.
inline BlockCanvas block_pack(const LineImage& img, int row_height = 64) {
  if (row_height < 16 || row_height % 16 != 0 || row_height > BlockCanvas::kSize) {
    throw ConfigError("row height must be a multiple of 16 in [16, 384]");
  }
  LineImage strip = standardize_height(flip_horizontal(img), row_height);

  BlockCanvas canvas;
  canvas.row_height = row_height;
  const auto g = canvas.geometry();
  if (strip.width > g.max_strip_width()) {
    strip = resize_bilinear(strip, row_height, g.max_strip_width());
    canvas.lossy = true;
  }
  canvas.strip_width_px = strip.width;
  canvas.rows_used = g.rows_for(strip.width);

  for (int block = 0; block < canvas.rows_used; ++block) {
    const int x0 = block * BlockCanvas::kSize;
    const int n = std::min(BlockCanvas::kSize, strip.width - x0);
    for (int r = 0; r < row_height; ++r) {
      const float* src = &strip.pixels[static_cast<std::size_t>(r) * strip.width + x0];
      std::copy(src, src + n, &canvas.at(block * row_height + r, 0));
    }
  }
  return canvas;
}

/// Inverse of the chunking and flip: returns the row_height-high strip in
/// its original right-to-left orientation.
inline LineImage block_unpack(const BlockCanvas& canvas) {
  canvas.validate();
  if (canvas.stretched) throw ValidationError("a stretched canvas has no strip to unpack");
  const int h = canvas.row_height;
  LineImage flipped(h, canvas.strip_width_px);
  for (int block = 0; block < canvas.rows_used; ++block) {
    const int x0 = block * BlockCanvas::kSize;
    const int n = std::min(BlockCanvas::kSize, canvas.strip_width_px - x0);
    for (int r = 0; r < h; ++r) {
      const float* src = &canvas.pixels[static_cast<std::size_t>(block * h + r) * BlockCanvas::kSize];
      std::copy(src, src + n, &flipped.pixels[static_cast<std::size_t>(r) * flipped.width + x0]);
    }
  }
  return flip_horizontal(flipped);
}

/// Ablation baseline: stretch straight to 384x384, ignoring aspect ratio.
inline BlockCanvas naive_resize(const LineImage& img) {
  const LineImage sq = resize_bilinear(img, BlockCanvas::kSize, BlockCanvas::kSize);
  BlockCanvas canvas;
  canvas.row_height = 64;
  canvas.strip_width_px = BlockCanvas::kSize;
  canvas.rows_used = 6;
  canvas.stretched = true;
  canvas.pixels = sq.pixels;
  return canvas;
}

}  // namespace hatformer
