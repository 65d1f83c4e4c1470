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

// PNG <-> LineImage / BlockCanvas. Files on disk always show dark ink on
// light paper; in memory the values are ink coverage (1 - luminance).

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "hatformer/error.hpp"
#include "hatformer/imaging/line_image.hpp"

namespace hatformer {

inline LineImage from_gray8(const cv::Mat& gray) {
  CV_Assert(gray.type() == CV_8UC1);
  LineImage img(gray.rows, gray.cols);
  for (int r = 0; r < gray.rows; ++r) {
    const auto* row = gray.ptr<unsigned char>(r);
    for (int c = 0; c < gray.cols; ++c) img.at(r, c) = 1.0f - static_cast<float>(row[c]) / 255.0f;
  }
  return img;
}

inline cv::Mat to_gray8(const std::vector<float>& px, int h, int w) {
  cv::Mat out(h, w, CV_8UC1);
  for (int r = 0; r < h; ++r) {
    auto* row = out.ptr<unsigned char>(r);
    for (int c = 0; c < w; ++c) {
      const double v = std::clamp(static_cast<double>(px[static_cast<std::size_t>(r) * w + c]), 0.0, 1.0);
      row[c] = static_cast<unsigned char>(std::lround(255.0 * (1.0 - v)));
    }
  }
  return out;
}

inline cv::Mat to_gray8(const LineImage& img) { return to_gray8(img.pixels, img.height, img.width); }

/// Loads 8-bit grayscale or colour PNG (colour is converted to luminance).
inline LineImage load_png(const std::filesystem::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (m.empty()) throw IoError("cannot read image " + path.string());
  if (m.depth() == CV_16U) m.convertTo(m, CV_8U, 1.0 / 257.0);
  cv::Mat gray;
  switch (m.channels()) {
    case 1: gray = m; break;
    case 3: cv::cvtColor(m, gray, cv::COLOR_BGR2GRAY); break;
    case 4: cv::cvtColor(m, gray, cv::COLOR_BGRA2GRAY); break;
    default: throw IoError("unsupported channel count in " + path.string());
  }
  return from_gray8(gray);
}

inline void write_png(const cv::Mat& m, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), m)) throw IoError("cannot write image " + path.string());
}

inline void save_png(const LineImage& img, const std::filesystem::path& path) {
  write_png(to_gray8(img), path);
}

inline void save_png(const BlockCanvas& canvas, const std::filesystem::path& path) {
  write_png(to_gray8(canvas.pixels, BlockCanvas::kSize, BlockCanvas::kSize), path);
}

inline std::vector<unsigned char> encode_png(const LineImage& img) {
  std::vector<unsigned char> buf;
  if (!cv::imencode(".png", to_gray8(img), buf)) throw IoError("PNG encoding failed");
  return buf;
}

}  // namespace hatformer
