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
 * @file bbpe.hpp
 * @brief Byte-level BPE: training, encoding, decoding and the JSON dictionary.
 *
 * Id layout:
 *   0..255   single bytes
 *   256..259 <s>, </s>, <pad>, <unk>
 *   260..    merges, in priority order
 *
 * Text is pre-tokenized into chunks of "leading whitespace + word" so merges
 * never cross a word boundary. Encoding is total (every byte has a token) and
 * decode(encode(s)) == s for any byte string.
 */

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hatformer/error.hpp"
#include "hatformer/utf8.hpp"

namespace hatformer::bbpe {

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;

inline constexpr TokenId kNumBytes = 256;
inline constexpr TokenId kBos = 256;
inline constexpr TokenId kEos = 257;
inline constexpr TokenId kPad = 258;
inline constexpr TokenId kUnk = 259;
inline constexpr TokenId kNumSpecials = 4;
inline constexpr TokenId kFirstMergeId = kNumBytes + kNumSpecials;
inline constexpr std::array<std::string_view, kNumSpecials> kSpecialNames = {"<s>", "</s>", "<pad>", "<unk>"};
inline constexpr std::string_view kSchema = "hatformer.bbpe/1";

namespace detail {

inline constexpr std::uint64_t pair_key(TokenId a, TokenId b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

inline bool is_ascii_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

inline std::string to_hex(std::string_view bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (unsigned char b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xF]);
  }
  return out;
}

inline std::string from_hex(std::string_view hex) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw ValidationError("bad hex digit in dictionary");
  };
  if (hex.size() % 2 != 0) throw ValidationError("odd-length hex string in dictionary");
  std::string out;
  out.reserve(hex.size() / 2);
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    out.push_back(static_cast<char>(nibble(hex[i]) * 16 + nibble(hex[i + 1])));
  }
  return out;
}

}  // namespace detail

/// Splits text into chunks of (whitespace run)(non-whitespace run). Trailing
/// whitespace becomes its own chunk. Concatenating the chunks gives the input.
inline std::vector<std::string_view> pretokenize(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const std::size_t start = i;
    while (i < n && detail::is_ascii_space(static_cast<unsigned char>(text[i]))) ++i;
    while (i < n && !detail::is_ascii_space(static_cast<unsigned char>(text[i]))) ++i;
    out.push_back(text.substr(start, i - start));
  }
  return out;
}

/// The dictionary: base bytes, special tokens and an ordered merge list.
/// Immutable after construction, so concurrent encode/decode is safe.
class MergeTable {
public:
  MergeTable() {
    vocab_.reserve(kFirstMergeId);
    for (int b = 0; b < kNumBytes; ++b) vocab_.emplace_back(1, static_cast<char>(b));
    for (int s = 0; s < kNumSpecials; ++s) vocab_.emplace_back();
  }

  int vocab_size() const { return static_cast<int>(vocab_.size()); }
  const std::vector<std::pair<TokenId, TokenId>>& merges() const { return merges_; }
  static bool is_special(TokenId id) { return id >= kNumBytes && id < kFirstMergeId; }

  /// Byte content of a token; empty for special tokens.
  const std::string& bytes_of(TokenId id) const {
    check_id(id);
    return vocab_[static_cast<std::size_t>(id)];
  }

  void check_id(TokenId id) const {
    if (id < 0 || id >= vocab_size()) {
      throw ValidationError("token id " + std::to_string(id) + " outside vocabulary of " +
                            std::to_string(vocab_size()));
    }
  }

  /// Merged id for an adjacent pair, if the pair is in the table.
  std::optional<TokenId> merge_of(TokenId a, TokenId b) const {
    const auto it = pair_to_id_.find(detail::pair_key(a, b));
    if (it == pair_to_id_.end()) return std::nullopt;
    return it->second;
  }

  /// Appends a merge; the new token is the concatenation of its parents.
  TokenId add_merge(TokenId a, TokenId b) {
    check_id(a);
    check_id(b);
    if (is_special(a) || is_special(b)) throw ValidationError("special tokens cannot be merged");
    if (pair_to_id_.contains(detail::pair_key(a, b))) throw ValidationError("duplicate merge");
    const auto id = static_cast<TokenId>(vocab_.size());
    vocab_.push_back(vocab_[static_cast<std::size_t>(a)] + vocab_[static_cast<std::size_t>(b)]);
    merges_.emplace_back(a, b);
    pair_to_id_.emplace(detail::pair_key(a, b), id);
    return id;
  }

  /// The table restricted to its first `n` merges.
  MergeTable truncated(std::size_t n) const {
    MergeTable t;
    for (std::size_t i = 0; i < std::min(n, merges_.size()); ++i) t.add_merge(merges_[i].first, merges_[i].second);
    return t;
  }

  nlohmann::json to_json() const {
    nlohmann::json vocab = nlohmann::json::object();
    for (TokenId id = 0; id < vocab_size(); ++id) {
      if (!is_special(id)) vocab[detail::to_hex(vocab_[static_cast<std::size_t>(id)])] = id;
    }
    nlohmann::json specials = nlohmann::json::object();
    for (int s = 0; s < kNumSpecials; ++s) specials[std::string(kSpecialNames[s])] = kNumBytes + s;
    nlohmann::json merges = nlohmann::json::array();
    for (const auto& [a, b] : merges_) merges.push_back({a, b});
    return {{"schema", kSchema}, {"vocab_size", vocab_size()}, {"specials", specials},
            {"vocab", vocab}, {"merges", merges}};
  }

  static MergeTable from_json(const nlohmann::json& j) {
    if (j.value("schema", std::string{}) != kSchema) {
      throw ValidationError("unsupported dictionary schema '" + j.value("schema", std::string{}) + "'");
    }
    const auto& specials = j.at("specials");
    for (int s = 0; s < kNumSpecials; ++s) {
      if (specials.at(std::string(kSpecialNames[s])).get<int>() != kNumBytes + s) {
        throw ValidationError("special token ids must be 256..259");
      }
    }
    MergeTable t;
    for (const auto& m : j.at("merges")) t.add_merge(m.at(0).get<TokenId>(), m.at(1).get<TokenId>());
    if (j.at("vocab_size").get<int>() != t.vocab_size()) {
      throw ValidationError("vocab_size does not match merge count");
    }
    const auto& vocab = j.at("vocab");
    if (vocab.size() != static_cast<std::size_t>(t.vocab_size() - kNumSpecials)) {
      throw ValidationError("vocab entry count does not match vocab_size");
    }
    for (const auto& [hex, id] : vocab.items()) {
      const auto tid = id.get<TokenId>();
      t.check_id(tid);
      if (is_special(tid) || detail::from_hex(hex) != t.vocab_[static_cast<std::size_t>(tid)]) {
        throw ValidationError("vocab entry " + hex + " disagrees with the merge list");
      }
    }
    return t;
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write dictionary " + path.string());
    out << to_json().dump(1) << '\n';
  }

  static MergeTable load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read dictionary " + path.string());
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("malformed dictionary " + path.string() + ": " + e.what());
    }
  }

  friend bool operator==(const MergeTable& a, const MergeTable& b) { return a.merges_ == b.merges_; }

private:
  std::vector<std::string> vocab_;
  std::vector<std::pair<TokenId, TokenId>> merges_;
  std::unordered_map<std::uint64_t, TokenId> pair_to_id_;
};

struct TrainOptions {
  int vocab_size = 16384;
  /// Pairs seen fewer times than this are never merged.
  std::uint64_t min_pair_count = 2;
};

/// Pre-token frequencies; feed it any number of documents.
class ChunkCounter {
public:
  void add(std::string_view text) {
    for (auto chunk : pretokenize(text)) ++counts_[std::string(chunk)];
    bytes_ += text.size();
  }
  const std::unordered_map<std::string, std::uint64_t>& counts() const { return counts_; }
  std::size_t bytes_seen() const { return bytes_; }

private:
  std::unordered_map<std::string, std::uint64_t> counts_;
  std::size_t bytes_ = 0;
};

/// Greedy BPE: repeatedly merges the most frequent adjacent pair; ties go to
/// the lexicographically smallest (left, right). Deterministic.
inline MergeTable train(const ChunkCounter& counter, const TrainOptions& opts) {
  if (opts.vocab_size < kFirstMergeId) {
    throw ConfigError("vocab_size must be at least " + std::to_string(kFirstMergeId) +
                      " (256 bytes + 4 special tokens)");
  }
  if (counter.counts().empty() || counter.bytes_seen() == 0) throw TrainingError("empty training corpus");

  // Sort chunks so word indices (and everything derived) are reproducible.
  std::vector<std::pair<std::string, std::uint64_t>> chunks(counter.counts().begin(), counter.counts().end());
  std::sort(chunks.begin(), chunks.end());

  std::vector<std::vector<TokenId>> words;
  std::vector<std::int64_t> freq;
  words.reserve(chunks.size());
  for (const auto& [s, c] : chunks) {
    std::vector<TokenId> w;
    w.reserve(s.size());
    for (unsigned char b : s) w.push_back(b);
    words.push_back(std::move(w));
    freq.push_back(static_cast<std::int64_t>(c));
  }

  std::unordered_map<std::uint64_t, std::int64_t> pair_count;
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> where;
  for (std::uint32_t wi = 0; wi < words.size(); ++wi) {
    const auto& w = words[wi];
    for (std::size_t i = 0; i + 1 < w.size(); ++i) {
      const auto k = detail::pair_key(w[i], w[i + 1]);
      pair_count[k] += freq[wi];
      auto& v = where[k];
      if (v.empty() || v.back() != wi) v.push_back(wi);
    }
  }

  struct Entry {
    std::int64_t count;
    std::uint64_t key;
    bool operator<(const Entry& o) const {
      if (count != o.count) return count < o.count;
      return key > o.key;  // smaller (left, right) wins ties
    }
  };
  std::priority_queue<Entry> heap;
  for (const auto& [k, c] : pair_count) heap.push({c, k});

  MergeTable table;
  std::unordered_map<std::uint64_t, std::int64_t> delta;
  while (table.vocab_size() < opts.vocab_size && !heap.empty()) {
    const Entry top = heap.top();
    heap.pop();
    const auto it = pair_count.find(top.key);
    if (it == pair_count.end() || it->second != top.count) continue;  // stale
    if (top.count < static_cast<std::int64_t>(opts.min_pair_count)) break;

    const auto left = static_cast<TokenId>(top.key >> 32);
    const auto right = static_cast<TokenId>(top.key & 0xFFFFFFFFu);
    const TokenId merged = table.add_merge(left, right);

    delta.clear();
    auto occurrences = std::move(where[top.key]);
    where.erase(top.key);
    for (const std::uint32_t wi : occurrences) {
      auto& w = words[wi];
      bool found = false;
      for (std::size_t i = 0; i + 1 < w.size(); ++i) {
        if (w[i] == left && w[i + 1] == right) {
          found = true;
          break;
        }
      }
      if (!found) continue;
      const std::int64_t f = freq[wi];
      for (std::size_t i = 0; i + 1 < w.size(); ++i) delta[detail::pair_key(w[i], w[i + 1])] -= f;
      std::vector<TokenId> nw;
      nw.reserve(w.size());
      for (std::size_t i = 0; i < w.size();) {
        if (i + 1 < w.size() && w[i] == left && w[i + 1] == right) {
          nw.push_back(merged);
          i += 2;
        } else {
          nw.push_back(w[i]);
          ++i;
        }
      }
      w = std::move(nw);
      for (std::size_t i = 0; i + 1 < w.size(); ++i) {
        const auto k = detail::pair_key(w[i], w[i + 1]);
        delta[k] += f;
        auto& v = where[k];
        if (v.empty() || v.back() != wi) v.push_back(wi);
      }
    }
    for (const auto& [k, d] : delta) {
      if (d == 0) continue;
      auto& c = pair_count[k];
      c += d;
      if (c <= 0) {
        pair_count.erase(k);
      } else {
        heap.push({c, k});
      }
    }
  }
  return table;
}

inline MergeTable train(std::string_view corpus, const TrainOptions& opts) {
  ChunkCounter counter;
  counter.add(corpus);
  return train(counter, opts);
}

/// Applies merges to one pre-token by priority (lowest merge rank first).
inline void encode_chunk(const MergeTable& table, std::string_view chunk, TokenSeq& out) {
  std::vector<TokenId> sym(chunk.begin(), chunk.end());
  for (auto& s : sym) s = static_cast<unsigned char>(s);
  while (sym.size() > 1) {
    TokenId best = std::numeric_limits<TokenId>::max();
    for (std::size_t i = 0; i + 1 < sym.size(); ++i) {
      if (const auto m = table.merge_of(sym[i], sym[i + 1]); m && *m < best) best = *m;
    }
    if (best == std::numeric_limits<TokenId>::max()) break;
    const auto [left, right] = table.merges()[static_cast<std::size_t>(best - kFirstMergeId)];
    std::size_t j = 0;
    for (std::size_t i = 0; i < sym.size();) {
      if (i + 1 < sym.size() && sym[i] == left && sym[i + 1] == right) {
        sym[j++] = best;
        i += 2;
      } else {
        sym[j++] = sym[i++];
      }
    }
    sym.resize(j);
  }
  out.insert(out.end(), sym.begin(), sym.end());
}

inline TokenSeq encode(const MergeTable& table, std::string_view text) {
  TokenSeq out;
  out.reserve(text.size() / 2 + 1);
  for (auto chunk : pretokenize(text)) encode_chunk(table, chunk, out);
  return out;
}

/// Concatenates token bytes. Special tokens contribute nothing. Byte
/// sequences that are not valid UTF-8 (only reachable from hand-made id
/// lists) are replaced with U+FFFD.
inline std::string decode(const MergeTable& table, std::span<const TokenId> ids) {
  std::string bytes;
  for (TokenId id : ids) bytes += table.bytes_of(id);
  if (utf8::is_valid(bytes)) return bytes;
  return utf8::encode(utf8::decode(bytes));
}

/// |encode(base, corpus)| / |encode(custom, corpus)|.
inline double compactness_ratio(const MergeTable& base, const MergeTable& custom, std::string_view corpus) {
  if (corpus.empty()) throw ValidationError("compactness ratio needs a non-empty corpus");
  std::size_t n_base = 0;
  std::size_t n_custom = 0;
  TokenSeq buf;
  for (auto chunk : pretokenize(corpus)) {
    buf.clear();
    encode_chunk(base, chunk, buf);
    n_base += buf.size();
    buf.clear();
    encode_chunk(custom, chunk, buf);
    n_custom += buf.size();
  }
  return static_cast<double>(n_base) / static_cast<double>(n_custom);
}

}  // namespace hatformer::bbpe
