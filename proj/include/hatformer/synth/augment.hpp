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

// The eight line-image augmentations. Images are CV_32F ink coverage in
// [0, 1]; every function returns an image of the same size, clamped to that
// range.
//
// Rotation, shear and stroke-width changes act on the bare ink layer, which
// the renderer keeps padded; the others act on the composited line.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string_view>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "hatformer/error.hpp"
#include "hatformer/rng.hpp"

namespace hatformer::synth {

enum class Augmentation : int {
  kIdentity = 0,
  kBlur = 1,
  kNoise = 2,
  kRotate = 3,
  kShear = 4,
  kContrast = 5,
  kJpeg = 6,
  kStrokeWidth = 7,
};

inline constexpr int kNumAugmentations = 8;
inline constexpr std::array<std::string_view, kNumAugmentations> kAugmentationNames = {
    "identity", "gaussian_blur", "gaussian_noise", "rotate", "shear", "brightness_contrast", "jpeg", "stroke_width"};

inline Augmentation augmentation_from_id(int id) {
  if (id < 0 || id >= kNumAugmentations) throw ConfigError("augmentation id must be in [0, 7]");
  return static_cast<Augmentation>(id);
}

inline bool acts_on_ink_layer(Augmentation a) {
  return a == Augmentation::kRotate || a == Augmentation::kShear || a == Augmentation::kStrokeWidth;
}

namespace detail {

inline cv::Mat clamp01(cv::Mat m) {
  cv::min(m, 1.0, m);
  cv::max(m, 0.0, m);
  return m;
}

inline cv::Mat warp(const cv::Mat& img, const cv::Matx23d& m) {
  cv::Mat out;
  cv::warpAffine(img, out, m, img.size(), cv::INTER_LINEAR, cv::BORDER_CONSTANT, cv::Scalar(0));
  return out;
}

}  // namespace detail

/// Rotation about the image centre by `degrees` (counter-clockwise).
inline cv::Mat rotate(const cv::Mat& img, double degrees) {
  const cv::Point2f centre(static_cast<float>(img.cols - 1) / 2.0f, static_cast<float>(img.rows - 1) / 2.0f);
  const cv::Mat m = cv::getRotationMatrix2D(centre, degrees, 1.0);
  return detail::clamp01(detail::warp(img, cv::Matx23d(m)));
}

/// Horizontal shear by `degrees`, anchored on the middle row.
inline cv::Mat shear(const cv::Mat& img, double degrees) {
  const double k = std::tan(degrees * std::numbers::pi / 180.0);
  const double cy = (img.rows - 1) / 2.0;
  return detail::clamp01(detail::warp(img, cv::Matx23d(1, k, -k * cy, 0, 1, 0)));
}

inline cv::Mat gaussian_blur(const cv::Mat& img, double sigma) {
  cv::Mat out;
  cv::GaussianBlur(img, out, cv::Size(0, 0), sigma, sigma, cv::BORDER_REFLECT);
  return detail::clamp01(out);
}

inline cv::Mat gaussian_noise(const cv::Mat& img, double sigma, CounterRng& rng) {
  cv::Mat out = img.clone();
  for (int r = 0; r < out.rows; ++r) {
    auto* row = out.ptr<float>(r);
    for (int c = 0; c < out.cols; ++c) row[c] += static_cast<float>(sigma * rng.normal());
  }
  return detail::clamp01(out);
}

/// Contrast `gain` about mid-grey plus a brightness `shift` (in coverage units).
inline cv::Mat brightness_contrast(const cv::Mat& img, double gain, double shift) {
  cv::Mat out;
  img.convertTo(out, CV_32F, gain, 0.5 * (1.0 - gain) + shift);
  return detail::clamp01(out);
}

inline cv::Mat jpeg_roundtrip(const cv::Mat& img, int quality) {
  cv::Mat gray;
  img.convertTo(gray, CV_8U, -255.0, 255.0);
  std::vector<unsigned char> buf;
  cv::imencode(".jpg", gray, buf, {cv::IMWRITE_JPEG_QUALITY, quality});
  const cv::Mat back = cv::imdecode(buf, cv::IMREAD_GRAYSCALE);
  cv::Mat out;
  back.convertTo(out, CV_32F, -1.0 / 255.0, 1.0);
  return detail::clamp01(out);
}

/// Grey-level dilation (thicken) or a half-strength erosion (thin).
inline cv::Mat stroke_width(const cv::Mat& img, bool thicken) {
  const cv::Mat kernel = cv::getStructuringElement(cv::MORPH_RECT, cv::Size(2, 2));
  cv::Mat out;
  if (thicken) {
    cv::dilate(img, out, kernel);
  } else {
    cv::erode(img, out, kernel);
    cv::addWeighted(img, 0.5, out, 0.5, 0.0, out);
  }
  return detail::clamp01(out);
}

/// Applies augmentation `a` with parameters drawn from `rng`.
inline cv::Mat augment(const cv::Mat& img, Augmentation a, CounterRng& rng) {
  CV_Assert(img.type() == CV_32F);
  switch (a) {
    case Augmentation::kIdentity: return img.clone();
    case Augmentation::kBlur: return gaussian_blur(img, rng.uniform(0.5, 1.2));
    case Augmentation::kNoise: return gaussian_noise(img, rng.uniform(0.02, 0.06), rng);
    case Augmentation::kRotate: return rotate(img, rng.uniform(-2.0, 2.0));
    case Augmentation::kShear: return shear(img, rng.uniform(-5.0, 5.0));
    case Augmentation::kContrast: return brightness_contrast(img, rng.uniform(0.8, 1.2), rng.uniform(-0.08, 0.08));
    case Augmentation::kJpeg: return jpeg_roundtrip(img, static_cast<int>(rng.uniform_int(20, 50)));
    case Augmentation::kStrokeWidth: return stroke_width(img, rng.uniform() < 0.5);
  }
  return img.clone();
}

}  // namespace hatformer::synth
