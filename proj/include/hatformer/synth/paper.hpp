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

// Procedural aged-paper textures: a base tone, low-frequency mottling, a few
// stains, horizontal fibres and fine grain. Values are ink coverage (0 =
// white paper), like every other image in the library.

#pragma once

#include <algorithm>
#include <cmath>

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include "hatformer/imaging/line_image.hpp"
#include "hatformer/rng.hpp"

namespace hatformer::synth {

inline LineImage make_paper(std::uint64_t seed, int height = 256, int width = 768) {
  CounterRng rng(seed, 0, 301);
  const double base = rng.uniform(0.04, 0.22);

  // Mottling: bicubic upsampling of a coarse random grid.
  const int gh = 4 + static_cast<int>(rng.uniform_int(0, 4));
  const int gw = 8 + static_cast<int>(rng.uniform_int(0, 8));
  cv::Mat coarse(gh, gw, CV_32F);
  for (int r = 0; r < gh; ++r) {
    for (int c = 0; c < gw; ++c) coarse.at<float>(r, c) = static_cast<float>(rng.normal());
  }
  cv::Mat mottle;
  cv::resize(coarse, mottle, cv::Size(width, height), 0, 0, cv::INTER_CUBIC);
  const double mottle_amp = rng.uniform(0.01, 0.05);

  cv::Mat paper(height, width, CV_32F, cv::Scalar(base));
  paper += mottle * mottle_amp;

  const int stains = static_cast<int>(rng.uniform_int(0, 3));
  for (int s = 0; s < stains; ++s) {
    const double cx = rng.uniform(0, width), cy = rng.uniform(0, height);
    const double radius = rng.uniform(0.1, 0.4) * height;
    const double depth = rng.uniform(0.03, 0.12);
    for (int r = 0; r < height; ++r) {
      auto* row = paper.ptr<float>(r);
      for (int c = 0; c < width; ++c) {
        const double d2 = ((c - cx) * (c - cx) + (r - cy) * (r - cy)) / (radius * radius);
        row[c] += static_cast<float>(depth * std::exp(-d2));
      }
    }
  }

  const int fibres = static_cast<int>(rng.uniform_int(10, 40));
  for (int f = 0; f < fibres; ++f) {
    const int r = static_cast<int>(rng.uniform_int(0, height - 1));
    const int c0 = static_cast<int>(rng.uniform_int(0, width - 1));
    const int len = static_cast<int>(rng.uniform_int(10, 120));
    const float v = static_cast<float>(rng.uniform(0.01, 0.04));
    auto* row = paper.ptr<float>(r);
    for (int c = c0; c < std::min(width, c0 + len); ++c) row[c] += v;
  }

  const double grain = rng.uniform(0.005, 0.025);
  LineImage out(height, width);
  for (int r = 0; r < height; ++r) {
    const auto* row = paper.ptr<float>(r);
    for (int c = 0; c < width; ++c) {
      out.at(r, c) = static_cast<float>(std::clamp(row[c] + grain * rng.normal(), 0.0, 0.6));
    }
  }
  return out;
}

}  // namespace hatformer::synth
