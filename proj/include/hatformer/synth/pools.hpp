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

#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "hatformer/error.hpp"
#include "hatformer/imaging/png_io.hpp"
#include "hatformer/rng.hpp"
#include "hatformer/synth/font_cmap.hpp"
#include "hatformer/utf8.hpp"

namespace hatformer::synth {

/// Word types with their corpus frequencies; sampling is frequency-weighted.
class Corpus {
public:
  Corpus() = default;

  /// Splits on whitespace and counts word types. Types are kept in
  /// code-point order so sampling does not depend on hash iteration.
  static Corpus from_text(std::string_view text) {
    std::map<std::string, std::uint64_t> counts;
    const auto cps = utf8::decode(text);
    std::u32string word;
    auto flush = [&] {
      if (!word.empty()) ++counts[utf8::encode(word)];
      word.clear();
    };
    for (char32_t c : cps) {
      if (utf8::is_space(c)) {
        flush();
      } else {
        word.push_back(c);
      }
    }
    flush();
    Corpus corpus;
    for (auto& [w, n] : counts) corpus.add(w, n);
    return corpus;
  }

  static Corpus load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read corpus " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    auto c = from_text(ss.str());
    if (c.empty()) throw ConfigError("corpus " + path.string() + " contains no words");
    return c;
  }

  void add(std::string word, std::uint64_t count) {
    if (word.empty() || count == 0) return;
    total_ += count;
    words_.push_back(std::move(word));
    counts_.push_back(count);
    cumulative_.push_back(total_);
  }

  bool empty() const { return words_.empty(); }
  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }
  const std::vector<std::uint64_t>& counts() const { return counts_; }

  const std::string& sample(CounterRng& rng) const {
    if (empty()) throw ConfigError("word pool is empty");
    const auto u = static_cast<std::uint64_t>(rng.uniform_int(0, static_cast<std::int64_t>(total_) - 1));
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return words_[static_cast<std::size_t>(it - cumulative_.begin())];
  }

  /// Every code point that can appear in a label, excluding the space.
  std::vector<char32_t> alphabet() const {
    std::vector<char32_t> out;
    for (const auto& w : words_) {
      for (char32_t c : utf8::decode(w)) out.push_back(c);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

private:
  std::vector<std::string> words_;
  std::vector<std::uint64_t> counts_;
  std::vector<std::uint64_t> cumulative_;
  std::uint64_t total_ = 0;
};

struct FontResource {
  std::string name;
  std::filesystem::path path;
  FontCoverage coverage;
};

struct Background {
  std::string name;
  LineImage image;  // ink coverage of the bare paper
};

struct AssetPools {
  std::vector<FontResource> fonts;
  std::vector<Background> backgrounds;
  Corpus corpus;

  void validate() const {
    if (fonts.empty()) throw ConfigError("font pool is empty");
    if (backgrounds.empty()) throw ConfigError("background pool is empty");
    if (corpus.empty()) throw ConfigError("word pool is empty");
  }
};

namespace detail {

inline std::vector<std::filesystem::path> files_with(const std::filesystem::path& dir,
                                                     std::initializer_list<std::string_view> exts) {
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    auto ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (std::find(exts.begin(), exts.end(), ext) != exts.end()) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

/// .ttf / .otf / .woff files in `dir`, sorted by file name.
inline std::vector<FontResource> load_fonts(const std::filesystem::path& dir) {
  std::vector<FontResource> out;
  for (const auto& p : detail::files_with(dir, {".ttf", ".otf", ".woff"})) {
    out.push_back({p.stem().string(), p, load_coverage(p)});
  }
  if (out.empty()) throw ConfigError("no fonts found in " + dir.string());
  return out;
}

/// .png / .jpg files in `dir`, sorted by file name.
inline std::vector<Background> load_backgrounds(const std::filesystem::path& dir) {
  std::vector<Background> out;
  for (const auto& p : detail::files_with(dir, {".png", ".jpg", ".jpeg"})) {
    out.push_back({p.stem().string(), load_png(p)});
  }
  if (out.empty()) throw ConfigError("no background images found in " + dir.string());
  return out;
}

inline AssetPools load_pools(const std::filesystem::path& fonts_dir, const std::filesystem::path& backgrounds_dir,
                             Corpus corpus) {
  AssetPools pools{load_fonts(fonts_dir), load_backgrounds(backgrounds_dir), std::move(corpus)};
  pools.validate();
  return pools;
}

#ifdef HATFORMER_ASSETS_DIR
inline std::filesystem::path default_fonts_dir() { return std::filesystem::path(HATFORMER_ASSETS_DIR) / "fonts"; }
inline std::filesystem::path default_backgrounds_dir() {
  return std::filesystem::path(HATFORMER_ASSETS_DIR) / "backgrounds";
}
#endif

}  // namespace hatformer::synth
