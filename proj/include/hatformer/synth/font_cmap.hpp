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

// Character coverage of TrueType / OpenType / WOFF 1.0 fonts, read from the
// Unicode cmap subtable (formats 4 and 12).

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <zlib.h>

#include "hatformer/error.hpp"

namespace hatformer::synth {

class FontCoverage {
public:
  FontCoverage() = default;
  explicit FontCoverage(std::vector<std::pair<char32_t, char32_t>> ranges) : ranges_(std::move(ranges)) {
    std::sort(ranges_.begin(), ranges_.end());
  }

  bool covers(char32_t c) const {
    auto it = std::upper_bound(ranges_.begin(), ranges_.end(), std::pair<char32_t, char32_t>{c, 0x10FFFF});
    if (it == ranges_.begin()) return false;
    --it;
    return c >= it->first && c <= it->second;
  }

  template <class Range>
  std::vector<char32_t> missing(const Range& cps) const {
    std::vector<char32_t> out;
    for (char32_t c : cps) {
      if (!covers(c)) out.push_back(c);
    }
    return out;
  }

  bool empty() const { return ranges_.empty(); }

private:
  std::vector<std::pair<char32_t, char32_t>> ranges_;  // inclusive, sorted
};

namespace detail {

class Reader {
public:
  explicit Reader(const std::vector<unsigned char>& b) : b_(b) {}
  std::uint16_t u16(std::size_t off) const {
    need(off, 2);
    return static_cast<std::uint16_t>(b_[off] << 8 | b_[off + 1]);
  }
  std::uint32_t u32(std::size_t off) const {
    need(off, 4);
    return static_cast<std::uint32_t>(b_[off]) << 24 | static_cast<std::uint32_t>(b_[off + 1]) << 16 |
           static_cast<std::uint32_t>(b_[off + 2]) << 8 | b_[off + 3];
  }
  void need(std::size_t off, std::size_t n) const {
    if (off + n > b_.size()) throw IoError("truncated font data");
  }

private:
  const std::vector<unsigned char>& b_;
};

inline std::vector<unsigned char> find_table(const std::vector<unsigned char>& font, std::uint32_t want) {
  const Reader r(font);
  const std::uint32_t magic = r.u32(0);
  if (magic == 0x774F4646) {  // 'wOFF'
    const std::uint16_t n = r.u16(12);
    for (std::uint16_t i = 0; i < n; ++i) {
      const std::size_t e = 44 + 20 * static_cast<std::size_t>(i);
      if (r.u32(e) != want) continue;
      const std::uint32_t off = r.u32(e + 4), comp = r.u32(e + 8), orig = r.u32(e + 12);
      r.need(off, comp);
      if (comp == orig) return {font.begin() + off, font.begin() + off + comp};
      std::vector<unsigned char> out(orig);
      uLongf out_len = orig;
      if (uncompress(out.data(), &out_len, font.data() + off, comp) != Z_OK || out_len != orig) {
        throw IoError("corrupt compressed font table");
      }
      return out;
    }
  } else if (magic == 0x00010000 || magic == 0x4F54544F || magic == 0x74727565) {  // TrueType, 'OTTO', 'true'
    const std::uint16_t n = r.u16(4);
    for (std::uint16_t i = 0; i < n; ++i) {
      const std::size_t e = 12 + 16 * static_cast<std::size_t>(i);
      if (r.u32(e) != want) continue;
      const std::uint32_t off = r.u32(e + 8), len = r.u32(e + 12);
      r.need(off, len);
      return {font.begin() + off, font.begin() + off + len};
    }
  } else if (magic == 0x774F4632) {
    throw IoError("WOFF2 fonts are not supported; convert to WOFF or TTF");
  } else {
    throw IoError("unrecognised font format");
  }
  throw IoError("font has no cmap table");
}

}  // namespace detail

inline FontCoverage parse_coverage(const std::vector<unsigned char>& font) {
  const auto cmap = detail::find_table(font, 0x636D6170);  // 'cmap'
  const detail::Reader r(cmap);
  const std::uint16_t n = r.u16(2);
  std::size_t best = 0;
  int best_rank = 0;
  for (std::uint16_t i = 0; i < n; ++i) {
    const std::size_t e = 4 + 8 * static_cast<std::size_t>(i);
    const std::uint16_t platform = r.u16(e), encoding = r.u16(e + 2);
    const std::uint32_t off = r.u32(e + 4);
    const std::uint16_t format = r.u16(off);
    int rank = 0;
    if (format == 12 && (platform == 0 || (platform == 3 && encoding == 10))) rank = 2;
    if (format == 4 && (platform == 0 || (platform == 3 && encoding == 1))) rank = 1;
    if (rank > best_rank) {
      best_rank = rank;
      best = off;
    }
  }
  if (best_rank == 0) throw IoError("font has no Unicode cmap subtable");

  std::vector<std::pair<char32_t, char32_t>> ranges;
  if (r.u16(best) == 12) {
    const std::uint32_t groups = r.u32(best + 12);
    for (std::uint32_t g = 0; g < groups; ++g) {
      const std::size_t e = best + 16 + 12 * static_cast<std::size_t>(g);
      if (r.u32(e + 8) != 0) ranges.emplace_back(r.u32(e), r.u32(e + 4));
    }
    return FontCoverage(std::move(ranges));
  }
  // Format 4: segments of (end, start, delta, range offset); a code point is
  // covered when it maps to a non-zero glyph.
  const std::size_t segs = r.u16(best + 6) / 2u;
  const std::size_t ends = best + 14;
  const std::size_t starts = ends + 2 * segs + 2;
  const std::size_t deltas = starts + 2 * segs;
  const std::size_t offsets = deltas + 2 * segs;
  for (std::size_t s = 0; s < segs; ++s) {
    const std::uint16_t end = r.u16(ends + 2 * s), start = r.u16(starts + 2 * s);
    const std::uint16_t delta = r.u16(deltas + 2 * s), ro = r.u16(offsets + 2 * s);
    if (start == 0xFFFF) continue;
    for (std::uint32_t c = start; c <= end; ++c) {
      std::uint16_t glyph;
      if (ro == 0) {
        glyph = static_cast<std::uint16_t>(c + delta);
      } else {
        const std::size_t at = offsets + 2 * s + ro + 2 * (c - start);
        glyph = r.u16(at);
        if (glyph != 0) glyph = static_cast<std::uint16_t>(glyph + delta);
      }
      if (glyph == 0) continue;
      if (!ranges.empty() && ranges.back().second + 1 == c) {
        ranges.back().second = c;
      } else {
        ranges.emplace_back(c, c);
      }
    }
  }
  return FontCoverage(std::move(ranges));
}

inline FontCoverage load_coverage(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read font " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return parse_coverage(bytes);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace hatformer::synth
