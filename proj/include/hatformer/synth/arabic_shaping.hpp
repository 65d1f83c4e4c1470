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
 * @file arabic_shaping.hpp
 * @brief Contextual joining to presentation forms and visual reordering.
 *
 * The text renderer lays glyphs out left to right, so a line is shaped
 * here: each letter is replaced by its isolated / final / initial / medial
 * presentation form (U+FE70..U+FEFC, U+FB50..), lam + alef pairs become
 * ligatures, and clusters (base letter plus marks) are reversed. Digit runs
 * keep their internal order. Within a visual cluster the marks precede their
 * base: with left-to-right layout that is the order in which the renderer's
 * mark attachment lands them on the right glyph.
 */

#pragma once

#include <algorithm>
#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hatformer/utf8.hpp"

namespace hatformer::synth {

enum class Joining { kNone, kRight, kDual, kCausing, kTransparent };

namespace detail {

struct Forms {
  char32_t letter;
  Joining joining;
  // isolated, final, initial, medial; 0 where the form does not exist
  std::array<char32_t, 4> forms;
};

inline constexpr Forms kFormTable[] = {
    {0x0621, Joining::kNone, {0xFE80, 0, 0, 0}},
    {0x0622, Joining::kRight, {0xFE81, 0xFE82, 0, 0}},
    {0x0623, Joining::kRight, {0xFE83, 0xFE84, 0, 0}},
    {0x0624, Joining::kRight, {0xFE85, 0xFE86, 0, 0}},
    {0x0625, Joining::kRight, {0xFE87, 0xFE88, 0, 0}},
    {0x0626, Joining::kDual, {0xFE89, 0xFE8A, 0xFE8B, 0xFE8C}},
    {0x0627, Joining::kRight, {0xFE8D, 0xFE8E, 0, 0}},
    {0x0628, Joining::kDual, {0xFE8F, 0xFE90, 0xFE91, 0xFE92}},
    {0x0629, Joining::kRight, {0xFE93, 0xFE94, 0, 0}},
    {0x062A, Joining::kDual, {0xFE95, 0xFE96, 0xFE97, 0xFE98}},
    {0x062B, Joining::kDual, {0xFE99, 0xFE9A, 0xFE9B, 0xFE9C}},
    {0x062C, Joining::kDual, {0xFE9D, 0xFE9E, 0xFE9F, 0xFEA0}},
    {0x062D, Joining::kDual, {0xFEA1, 0xFEA2, 0xFEA3, 0xFEA4}},
    {0x062E, Joining::kDual, {0xFEA5, 0xFEA6, 0xFEA7, 0xFEA8}},
    {0x062F, Joining::kRight, {0xFEA9, 0xFEAA, 0, 0}},
    {0x0630, Joining::kRight, {0xFEAB, 0xFEAC, 0, 0}},
    {0x0631, Joining::kRight, {0xFEAD, 0xFEAE, 0, 0}},
    {0x0632, Joining::kRight, {0xFEAF, 0xFEB0, 0, 0}},
    {0x0633, Joining::kDual, {0xFEB1, 0xFEB2, 0xFEB3, 0xFEB4}},
    {0x0634, Joining::kDual, {0xFEB5, 0xFEB6, 0xFEB7, 0xFEB8}},
    {0x0635, Joining::kDual, {0xFEB9, 0xFEBA, 0xFEBB, 0xFEBC}},
    {0x0636, Joining::kDual, {0xFEBD, 0xFEBE, 0xFEBF, 0xFEC0}},
    {0x0637, Joining::kDual, {0xFEC1, 0xFEC2, 0xFEC3, 0xFEC4}},
    {0x0638, Joining::kDual, {0xFEC5, 0xFEC6, 0xFEC7, 0xFEC8}},
    {0x0639, Joining::kDual, {0xFEC9, 0xFECA, 0xFECB, 0xFECC}},
    {0x063A, Joining::kDual, {0xFECD, 0xFECE, 0xFECF, 0xFED0}},
    {0x0641, Joining::kDual, {0xFED1, 0xFED2, 0xFED3, 0xFED4}},
    {0x0642, Joining::kDual, {0xFED5, 0xFED6, 0xFED7, 0xFED8}},
    {0x0643, Joining::kDual, {0xFED9, 0xFEDA, 0xFEDB, 0xFEDC}},
    {0x0644, Joining::kDual, {0xFEDD, 0xFEDE, 0xFEDF, 0xFEE0}},
    {0x0645, Joining::kDual, {0xFEE1, 0xFEE2, 0xFEE3, 0xFEE4}},
    {0x0646, Joining::kDual, {0xFEE5, 0xFEE6, 0xFEE7, 0xFEE8}},
    {0x0647, Joining::kDual, {0xFEE9, 0xFEEA, 0xFEEB, 0xFEEC}},
    {0x0648, Joining::kRight, {0xFEED, 0xFEEE, 0, 0}},
    {0x0649, Joining::kRight, {0xFEEF, 0xFEF0, 0, 0}},
    {0x064A, Joining::kDual, {0xFEF1, 0xFEF2, 0xFEF3, 0xFEF4}},
    {0x0671, Joining::kRight, {0xFB50, 0xFB51, 0, 0}},
};

inline const Forms* find_forms(char32_t c) {
  for (const auto& f : kFormTable) {
    if (f.letter == c) return &f;
  }
  return nullptr;
}

// lam + {madda, hamza above, hamza below, bare} alef -> isolated ligature;
// final form is isolated + 1.
inline std::optional<char32_t> lam_alef(char32_t alef) {
  switch (alef) {
    case 0x0622: return 0xFEF5;
    case 0x0623: return 0xFEF7;
    case 0x0625: return 0xFEF9;
    case 0x0627: return 0xFEFB;
    default: return std::nullopt;
  }
}

}  // namespace detail

/// Combining marks: tashkeel, superscript alef and the Quranic annotation range.
inline bool is_arabic_mark(char32_t c) {
  return (c >= 0x064B && c <= 0x065F) || c == 0x0670 || (c >= 0x06D6 && c <= 0x06ED && c != 0x06DD && c != 0x06DE);
}

inline Joining joining_type(char32_t c) {
  if (is_arabic_mark(c)) return Joining::kTransparent;
  if (c == 0x0640) return Joining::kCausing;  // tatweel
  if (const auto* f = detail::find_forms(c)) return f->joining;
  return Joining::kNone;
}

inline bool is_digit(char32_t c) {
  return (c >= U'0' && c <= U'9') || (c >= 0x0660 && c <= 0x0669) || (c >= 0x06F0 && c <= 0x06F9);
}

/// One rendered unit in logical order: a base code point (possibly a
/// presentation form or ligature) followed by zero or more combining marks.
struct Cluster {
  std::u32string text;
};

/// Contextual forms in logical order, grouped into clusters.
inline std::vector<Cluster> shape_logical(std::u32string_view s) {
  const std::size_t n = s.size();
  // Index of the previous / next non-transparent character.
  auto prev_base = [&](std::size_t i) -> std::optional<std::size_t> {
    while (i > 0) {
      --i;
      if (joining_type(s[i]) != Joining::kTransparent) return i;
    }
    return std::nullopt;
  };
  auto next_base = [&](std::size_t i) -> std::optional<std::size_t> {
    for (++i; i < n; ++i) {
      if (joining_type(s[i]) != Joining::kTransparent) return i;
    }
    return std::nullopt;
  };
  auto joins_forward = [](Joining j) { return j == Joining::kDual || j == Joining::kCausing; };
  auto joins_backward = [](Joining j) {
    return j == Joining::kDual || j == Joining::kRight || j == Joining::kCausing;
  };

  std::vector<Cluster> out;
  for (std::size_t i = 0; i < n; ++i) {
    const char32_t c = s[i];
    const Joining j = joining_type(c);
    if (j == Joining::kTransparent) {
      if (out.empty()) out.push_back({});
      out.back().text.push_back(c);
      continue;
    }
    const auto p = prev_base(i);
    const bool join_prev = p && joins_forward(joining_type(s[*p])) && joins_backward(j);

    if (c == 0x0644) {
      if (const auto nb = next_base(i); nb && detail::lam_alef(s[*nb])) {
        Cluster cl;
        cl.text.push_back(*detail::lam_alef(s[*nb]) + (join_prev ? 1 : 0));
        for (std::size_t k = i + 1; k < *nb; ++k) cl.text.push_back(s[k]);
        std::size_t k = *nb + 1;
        for (; k < n && joining_type(s[k]) == Joining::kTransparent; ++k) cl.text.push_back(s[k]);
        out.push_back(std::move(cl));
        i = k - 1;
        continue;
      }
    }

    const auto* f = detail::find_forms(c);
    if (!f) {
      out.push_back({std::u32string(1, c)});
      continue;
    }
    const auto nx = next_base(i);
    const bool join_next = nx && joins_forward(j) && joins_backward(joining_type(s[*nx]));
    int form = 0;
    if (join_prev && join_next) {
      form = 3;
    } else if (join_prev) {
      form = 1;
    } else if (join_next) {
      form = 2;
    }
    char32_t g = f->forms[static_cast<std::size_t>(form)];
    if (g == 0) g = f->forms[join_prev ? 1 : 0];
    out.push_back({std::u32string(1, g)});
  }
  return out;
}

/// Shaped clusters in left-to-right display order.
inline std::u32string shape_visual(std::u32string_view s) {
  auto clusters = shape_logical(s);
  std::reverse(clusters.begin(), clusters.end());
  // Re-reverse digit runs so numbers read left to right.
  for (std::size_t i = 0; i < clusters.size();) {
    auto is_digit_cluster = [&](std::size_t k) {
      return !clusters[k].text.empty() && is_digit(clusters[k].text[0]);
    };
    if (!is_digit_cluster(i)) {
      ++i;
      continue;
    }
    std::size_t k = i;
    while (k < clusters.size() && is_digit_cluster(k)) ++k;
    std::reverse(clusters.begin() + static_cast<std::ptrdiff_t>(i), clusters.begin() + static_cast<std::ptrdiff_t>(k));
    i = k;
  }
  std::u32string out;
  for (const auto& c : clusters) {
    if (c.text.size() > 1 && !is_arabic_mark(c.text[0])) {
      out.append(c.text, 1);
      out.push_back(c.text[0]);
    } else {
      out += c.text;
    }
  }
  return out;
}

inline std::string shape_visual(std::string_view utf8_text) { return utf8::encode(shape_visual(utf8::decode(utf8_text))); }

/// Code points a font must map for shape_visual(s) to render.
inline std::vector<char32_t> required_code_points(std::u32string_view s) {
  auto v = shape_visual(s);
  std::vector<char32_t> out(v.begin(), v.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  out.erase(std::remove(out.begin(), out.end(), U' '), out.end());
  return out;
}

}  // namespace hatformer::synth
