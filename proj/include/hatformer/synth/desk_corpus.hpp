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
 * @file desk_corpus.hpp
 * @brief Seeded stand-in text corpora.
 *
 * Arabic text is built from triliteral roots poured into vocalized
 * derivational patterns, with clitic prefixes and pronoun suffixes, and word
 * frequencies following a Zipf law. Tashkeel is kept on a minority of
 * tokens, as in lightly vocalized manuscripts. English text uses a list of
 * function words plus syllable-built content words under the same law.
 *
 * These are substitutes for real corpora when none is available; anything
 * that takes a corpus also accepts a file.
 */

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "hatformer/rng.hpp"
#include "hatformer/utf8.hpp"

namespace hatformer::synth {

struct CorpusOptions {
  std::uint64_t seed = 1;
  std::size_t target_bytes = 1 << 20;
  int vocabulary = 30000;
  double zipf_exponent = 1.05;
  /// Fraction of Arabic tokens that keep their tashkeel.
  double vocalized_fraction = 0.15;
};

namespace detail {

// Rank -> word index sampler for p(rank) ~ 1 / rank^s.
class ZipfSampler {
public:
  ZipfSampler(std::size_t n, double s) : cdf_(n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      acc += 1.0 / std::pow(static_cast<double>(i + 1), s);
      cdf_[i] = acc;
    }
    for (auto& c : cdf_) c /= acc;
  }
  std::size_t operator()(CounterRng& rng) const {
    const double u = rng.uniform();
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
  }

private:
  std::vector<double> cdf_;
};

inline constexpr std::u32string_view kRootLetters = U"بتثجحخدذرزسشصضطظعغفقكلمنهوي";

// '1', '2', '3' stand for the root consonants.
inline constexpr std::u32string_view kPatterns[] = {
    U"1َ2َ3َ",       U"يَ1ْ2ُ3ُ",   U"1َا2ِ3",      U"مَ1ْ2ُو3",   U"1ِ2َا3",    U"مَ1ْ2َ3",
    U"مَ1ْ2َ3َة",   U"1ُ2ُو3",     U"1َ2ِي3",      U"تَ1ْ2ِي3",   U"مُ1َ2ِّ3",  U"اِسْتِ1ْ2َا3",
    U"تَ1َ2ُّ3",     U"1ُ2ْ3َة",    U"أَ1ْ2َا3",    U"1َ2َّ3َ",    U"اِ1ْتِ2َا3", U"مُ1ْ2َ3",
    U"يُ1َ2ِّ3ُ",    U"1َ2ْ3",      U"1ِ2ْ3َة",     U"تَ1َا2َ3َ",  U"مُ1َا2َ3َة", U"1َ2َا3ِ3",
};

inline constexpr std::u32string_view kPrefixes[] = {U"ال", U"و", U"وال", U"ب", U"بال", U"ل", U"لل", U"ف", U"ك"};
inline constexpr std::u32string_view kSuffixes[] = {U"ه", U"ها", U"هم", U"ات", U"ون", U"ين", U"ي", U"نا", U"كم"};

inline constexpr std::u32string_view kArabicFunctionWords[] = {
    U"في",  U"من",  U"على", U"إلى", U"عن",   U"أن",  U"إن",  U"ما",   U"لا",  U"هذا", U"هذه",
    U"ذلك", U"التي", U"الذي", U"كان", U"قد",  U"ثم",  U"أو",  U"هو",   U"هي",  U"بن",  U"عبد",
    U"الله", U"قال", U"كل",  U"بعد", U"قبل", U"حتى", U"مع",  U"بين",  U"عند", U"لم",  U"لن",
    U"سنة", U"يوم", U"رحمه", U"تعالى", U"وقد", U"فلما", U"إذا", U"أما",  U"كما", U"وهو", U"منه",
};

inline constexpr std::string_view kEnglishFunctionWords[] = {
    "the", "of",   "and",  "to",    "in",    "a",    "is",   "that",  "for",  "it",   "as",   "was",  "with",
    "be",  "by",   "on",   "not",   "he",    "this", "are",  "or",    "his",  "from", "at",   "which", "but",
    "have", "an",  "they", "you",   "were",  "her",  "she",  "there", "been", "one",  "all",  "their", "has",
    "would", "when", "who", "will", "more",  "no",   "if",   "out",   "so",   "said", "what", "up",    "its",
    "about", "into", "than", "them", "can",  "only", "other", "new",  "some", "could", "time", "these", "two",
};

inline constexpr std::string_view kOnsets[] = {"b", "c", "d", "f", "g", "h", "l", "m", "n", "p", "r", "s", "t",
                                               "v", "w", "st", "tr", "pr", "ch", "sh", "th", "gr", "bl", "cr", ""};
inline constexpr std::string_view kVowels[] = {"a", "e", "i", "o", "u", "ea", "ou", "ai", "io", "ee"};
inline constexpr std::string_view kCodas[] = {"",  "n", "r", "s", "t", "l", "nd", "st", "ng", "rt",
                                              "ck", "m", "d", "ll", "ss", "nt", "ty", "ly", "ment", "tion"};

inline bool is_tashkeel(char32_t c) { return c >= 0x064B && c <= 0x0652; }

inline std::u32string strip_tashkeel(std::u32string_view w) {
  std::u32string out;
  for (char32_t c : w) {
    if (!is_tashkeel(c)) out.push_back(c);
  }
  return out;
}

}  // namespace detail

/// Vocalized Arabic word types, most frequent first.
inline std::vector<std::u32string> arabic_vocabulary(const CorpusOptions& opts) {
  CounterRng rng(opts.seed, 0, 101);
  std::vector<std::u32string> words;
  std::unordered_set<std::u32string> seen;
  for (auto w : detail::kArabicFunctionWords) {
    words.emplace_back(w);
    seen.emplace(w);
  }
  const auto letters = detail::kRootLetters;
  std::vector<std::array<char32_t, 3>> roots;
  const int n_roots = std::max(50, opts.vocabulary / 12);
  while (static_cast<int>(roots.size()) < n_roots) {
    std::array<char32_t, 3> r{};
    for (auto& c : r) c = letters[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(letters.size()) - 1))];
    if (r[0] == r[1] && r[1] == r[2]) continue;
    roots.push_back(r);
  }
  int guard = 0;
  while (static_cast<int>(words.size()) < opts.vocabulary && guard++ < opts.vocabulary * 20) {
    const auto& root = roots[static_cast<std::size_t>(rng.uniform_int(0, n_roots - 1))];
    const auto pattern = detail::kPatterns[rng.uniform_int(0, std::size(detail::kPatterns) - 1)];
    std::u32string w;
    if (rng.uniform() < 0.35) w += detail::kPrefixes[rng.uniform_int(0, std::size(detail::kPrefixes) - 1)];
    for (char32_t c : pattern) {
      if (c == U'1' || c == U'2' || c == U'3') {
        w.push_back(root[static_cast<std::size_t>(c - U'1')]);
      } else {
        w.push_back(c);
      }
    }
    if (rng.uniform() < 0.3) w += detail::kSuffixes[rng.uniform_int(0, std::size(detail::kSuffixes) - 1)];
    if (seen.insert(w).second) words.push_back(std::move(w));
  }
  return words;
}

/// Running Arabic text of roughly `target_bytes` UTF-8 bytes, one line per sentence.
inline std::string arabic_corpus(const CorpusOptions& opts) {
  const auto vocab = arabic_vocabulary(opts);
  const detail::ZipfSampler zipf(vocab.size(), opts.zipf_exponent);
  CounterRng rng(opts.seed, 0, 102);
  std::string out;
  out.reserve(opts.target_bytes + 256);
  while (out.size() < opts.target_bytes) {
    const auto n = rng.uniform_int(4, 16);
    std::u32string line;
    for (std::int64_t i = 0; i < n; ++i) {
      if (i) line.push_back(U' ');
      const auto& w = vocab[zipf(rng)];
      if (rng.uniform() < opts.vocalized_fraction) {
        line += w;
      } else {
        line += detail::strip_tashkeel(w);
      }
      if (i + 1 < n && rng.uniform() < 0.06) line.push_back(U'،');
    }
    line.push_back(rng.uniform() < 0.8 ? U'.' : U':');
    out += utf8::encode(line);
    out.push_back('\n');
  }
  return out;
}

inline std::vector<std::string> english_vocabulary(const CorpusOptions& opts) {
  CounterRng rng(opts.seed, 0, 201);
  std::vector<std::string> words(std::begin(detail::kEnglishFunctionWords), std::end(detail::kEnglishFunctionWords));
  std::unordered_set<std::string> seen(words.begin(), words.end());
  int guard = 0;
  while (static_cast<int>(words.size()) < opts.vocabulary && guard++ < opts.vocabulary * 20) {
    std::string w;
    const auto syllables = rng.uniform_int(1, 3);
    for (std::int64_t s = 0; s < syllables; ++s) {
      w += detail::kOnsets[rng.uniform_int(0, std::size(detail::kOnsets) - 1)];
      w += detail::kVowels[rng.uniform_int(0, std::size(detail::kVowels) - 1)];
      w += detail::kCodas[rng.uniform_int(0, std::size(detail::kCodas) - 1)];
    }
    if (rng.uniform() < 0.2) w += rng.uniform() < 0.5 ? "s" : "ed";
    if (seen.insert(w).second) words.push_back(std::move(w));
  }
  return words;
}

inline std::string english_corpus(const CorpusOptions& opts) {
  const auto vocab = english_vocabulary(opts);
  const detail::ZipfSampler zipf(vocab.size(), opts.zipf_exponent);
  CounterRng rng(opts.seed, 0, 202);
  std::string out;
  out.reserve(opts.target_bytes + 256);
  while (out.size() < opts.target_bytes) {
    const auto n = rng.uniform_int(4, 18);
    for (std::int64_t i = 0; i < n; ++i) {
      if (i) out.push_back(' ');
      std::string w = vocab[zipf(rng)];
      if (i == 0) w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
      out += w;
      if (i + 1 < n && rng.uniform() < 0.07) out.push_back(',');
    }
    out += rng.uniform() < 0.9 ? ".\n" : "?\n";
  }
  return out;
}

}  // namespace hatformer::synth
