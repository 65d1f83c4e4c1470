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

#include <gtest/gtest.h>

#include <filesystem>

#include "hatformer/imaging/line_image.hpp"
#include "hatformer/imaging/png_io.hpp"
#include "hatformer/rng.hpp"

namespace hatformer {
namespace {

LineImage random_image(CounterRng& rng, int h, int w) {
  LineImage img(h, w);
  for (auto& p : img.pixels) p = static_cast<float>(rng.uniform());
  return img;
}

TEST(FlipHorizontal, ReversesARow) {
  LineImage img(1, 3);
  img.pixels = {0.1f, 0.2f, 0.3f};
  EXPECT_EQ(flip_horizontal(img).pixels, (std::vector<float>{0.3f, 0.2f, 0.1f}));
}

TEST(FlipHorizontal, IsAnInvolution) {
  CounterRng rng(1);
  const auto img = random_image(rng, 7, 33);
  EXPECT_EQ(flip_horizontal(flip_horizontal(img)), img);
}

TEST(FlipHorizontal, FirstColumnMovesToLast) {
  CounterRng rng(2);
  const auto img = random_image(rng, 5, 41);
  const auto f = flip_horizontal(img);
  for (int r = 0; r < img.height; ++r) {
    EXPECT_EQ(f.at(r, img.width - 1), img.at(r, 0));
    for (int c = 0; c < img.width; ++c) ASSERT_EQ(f.at(r, c), img.at(r, img.width - 1 - c));
  }
}

TEST(StandardizeHeight, ExactHalving) {
  const auto out = standardize_height(LineImage(128, 1228, 0.5f));
  EXPECT_EQ(out.height, 64);
  EXPECT_EQ(out.width, 614);
}

TEST(StandardizeHeight, NoOpAtTargetHeight) {
  CounterRng rng(3);
  const auto img = random_image(rng, 64, 614);
  EXPECT_EQ(standardize_height(img), img);
}

TEST(StandardizeHeight, RoundsScaledWidth) {
  // round(500 * 64 / 100) = round(320.0)
  EXPECT_EQ(standardize_height(LineImage(100, 500)).width, 320);
  // 3 * 64 / 128 = 1.5 rounds away from zero
  EXPECT_EQ(scaled_width(3, 128, 64), 2);
  // 5 * 64 / 128 = 2.5
  EXPECT_EQ(scaled_width(5, 128, 64), 3);
  // 1 * 64 / 200 = 0.32 clamps to the minimum width
  EXPECT_EQ(scaled_width(1, 200, 64), 1);
}

TEST(StandardizeHeight, RejectsHeightsOffThePatchGrid) {
  EXPECT_THROW(standardize_height(LineImage(10, 10), 60), ConfigError);
  EXPECT_THROW(standardize_height(LineImage(10, 10), 0), ConfigError);
}

TEST(ResizeBilinear, UpscalingAConstantKeepsItConstant) {
  const auto out = resize_bilinear(LineImage(3, 5, 0.25f), 17, 29);
  for (float v : out.pixels) EXPECT_FLOAT_EQ(v, 0.25f);
}

TEST(BlockPack, FullWidthFillsAllSixRows) {
  const auto canvas = block_pack(LineImage(64, 2304, 1.0f));
  EXPECT_EQ(canvas.rows_used, 6);
  EXPECT_EQ(canvas.strip_width_px, 2304);
  for (float v : canvas.pixels) ASSERT_EQ(v, 1.0f);
}

TEST(BlockPack, AverageWidthUsesTwoRows) {
  const auto canvas = block_pack(LineImage(64, 614, 1.0f));
  EXPECT_EQ(canvas.rows_used, 2);
  for (int r = 0; r < 64; ++r) {
    for (int c = 0; c < 384; ++c) ASSERT_EQ(canvas.at(r, c), 1.0f);
  }
  // 614 = 384 + 230
  for (int r = 64; r < 128; ++r) {
    for (int c = 0; c < 230; ++c) ASSERT_EQ(canvas.at(r, c), 1.0f);
    for (int c = 230; c < 384; ++c) ASSERT_EQ(canvas.at(r, c), 0.0f);
  }
  for (int r = 128; r < 384; ++r) {
    for (int c = 0; c < 384; ++c) ASSERT_EQ(canvas.at(r, c), 0.0f);
  }
}

TEST(BlockPack, ExactlyOneRow) {
  EXPECT_EQ(block_pack(LineImage(64, 384, 1.0f)).rows_used, 1);
  EXPECT_EQ(block_pack(LineImage(64, 385, 1.0f)).rows_used, 2);
}

TEST(BlockPack, StripIsFlippedBeforeChunking) {
  LineImage img(64, 500);
  img.at(10, img.width - 1) = 1.0f;  // rightmost column = start of the Arabic text
  img.at(20, 0) = 0.5f;              // leftmost column = end of the line
  const auto canvas = block_pack(img);
  EXPECT_EQ(canvas.at(10, 0), 1.0f);
  // flipped index 499 -> second row, column 115
  EXPECT_EQ(canvas.at(64 + 20, 499 - 384), 0.5f);
}

TEST(BlockPack, OversizeStripsAreCompressedAndFlagged) {
  const auto canvas = block_pack(LineImage(64, 3000, 1.0f));
  EXPECT_TRUE(canvas.lossy);
  EXPECT_EQ(canvas.strip_width_px, 2304);
  EXPECT_EQ(canvas.rows_used, 6);
  EXPECT_FALSE(block_pack(LineImage(64, 2304)).lossy);
}

TEST(BlockPack, HeightIsStandardizedFirst) {
  const auto canvas = block_pack(LineImage(32, 600, 1.0f));
  EXPECT_EQ(canvas.strip_width_px, 1200);
  EXPECT_EQ(canvas.rows_used, 4);
}

TEST(BlockPack, PatchRowsNeverStraddleStripRows) {
  // Every 16 px patch row lies inside exactly one 64 px strip row.
  constexpr int kPatch = 16;
  const BlockGeometry g;
  EXPECT_EQ(g.row_height % kPatch, 0);
  for (int patch_row = 0; patch_row < 384 / kPatch; ++patch_row) {
    const int top = patch_row * kPatch;
    const int bottom = top + kPatch - 1;
    EXPECT_EQ(top / g.row_height, bottom / g.row_height);
  }
  EXPECT_EQ(g.row_height / kPatch, 4);
}

TEST(BlockPack, PaddingIsTheComplementOfTheFootprint) {
  CounterRng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const int w = static_cast<int>(rng.uniform_int(1, 2304));
    const auto canvas = block_pack(LineImage(64, w, 1.0f));
    ASSERT_EQ(canvas.rows_used, (w + 383) / 384);
    for (int r = 0; r < 384; ++r) {
      for (int c = 0; c < 384; ++c) {
        const bool inside = r / 64 * 384 + c < w && r / 64 < canvas.rows_used;
        ASSERT_EQ(canvas.at(r, c), inside ? 1.0f : 0.0f) << "w=" << w << " r=" << r << " c=" << c;
        ASSERT_EQ(canvas.to_strip(r, c).has_value(), inside);
      }
    }
  }
}

TEST(BlockUnpack, RoundTripsRandomStrips) {
  CounterRng rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    const int w = static_cast<int>(rng.uniform_int(1, 2304));
    const auto img = random_image(rng, 64, w);
    const auto back = block_unpack(block_pack(img));
    ASSERT_EQ(back, img) << "w=" << w;
  }
}

TEST(BlockUnpack, RecoversGeometryFromMetadata) {
  BlockCanvas canvas;
  canvas.strip_width_px = 614;
  canvas.rows_used = 2;
  const auto strip = block_unpack(canvas);
  EXPECT_EQ(strip.height, 64);
  EXPECT_EQ(strip.width, 614);
}

TEST(BlockUnpack, DegenerateCanvas) {
  BlockCanvas canvas;
  canvas.strip_width_px = 1;
  canvas.rows_used = 1;
  const auto strip = block_unpack(canvas);
  EXPECT_EQ(strip, LineImage(64, 1, 0.0f));
}

TEST(BlockUnpack, RejectsInconsistentMetadata) {
  BlockCanvas canvas;
  canvas.strip_width_px = 614;
  canvas.rows_used = 3;
  EXPECT_THROW(block_unpack(canvas), ValidationError);
  canvas.strip_width_px = 0;
  canvas.rows_used = 0;
  EXPECT_THROW(block_unpack(canvas), ValidationError);
  canvas.strip_width_px = 2305;
  canvas.rows_used = 7;
  EXPECT_THROW(block_unpack(canvas), ValidationError);
}

TEST(NaiveResize, CompressesTheAverageLineBy1Point6) {
  const auto canvas = naive_resize(LineImage(64, 614, 0.5f));
  EXPECT_EQ(canvas.strip_width_px, 384);
  EXPECT_EQ(canvas.rows_used, 6);
  EXPECT_NO_THROW(canvas.validate());
  const double horizontal_compression = 614.0 / BlockCanvas::kSize;
  EXPECT_NEAR(horizontal_compression, 1.6, 0.005);
  EXPECT_THROW(block_unpack(canvas), ValidationError);
}

TEST(NaiveResize, SquareInputIsUnchanged) {
  CounterRng rng(6);
  const auto img = random_image(rng, 384, 384);
  EXPECT_EQ(naive_resize(img).pixels, img.pixels);
}

TEST(NaiveResize, HalvingBlendsColumnPairs) {
  // 64x768 -> 384x384: output column x samples input position 2x + 0.5.
  LineImage img(64, 768);
  for (int r = 0; r < 64; ++r) {
    for (int c = 0; c < 768; ++c) img.at(r, c) = static_cast<float>(c % 2);
  }
  const auto canvas = naive_resize(img);
  for (float v : canvas.pixels) ASSERT_FLOAT_EQ(v, 0.5f);
}

TEST(PngIo, RoundTripWithin8BitQuantisation) {
  CounterRng rng(7);
  const auto img = random_image(rng, 20, 31);
  const auto path = std::filesystem::temp_directory_path() / "hatformer_png_io_test.png";
  save_png(img, path);
  const auto back = load_png(path);
  ASSERT_EQ(back.height, img.height);
  ASSERT_EQ(back.width, img.width);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) EXPECT_NEAR(back.pixels[i], img.pixels[i], 0.5 / 255 + 1e-6);
  std::filesystem::remove(path);
}

TEST(PngIo, MissingFileIsAnIoError) {
  EXPECT_THROW(load_png("/nonexistent/definitely_missing.png"), IoError);
}

}  // namespace
}  // namespace hatformer
