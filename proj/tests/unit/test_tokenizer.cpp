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
#include <map>

#include "hatformer/tokenizer/bbpe.hpp"
#include "support/fuzz.hpp"

namespace hatformer::bbpe {
namespace {

// Textbook BPE: recount every pair from scratch on each iteration.
std::vector<std::pair<TokenId, TokenId>> naive_merges(std::string_view corpus, int vocab_size,
                                                      std::int64_t min_count) {
  std::map<std::string, std::int64_t> chunk_counts;
  for (auto c : pretokenize(corpus)) ++chunk_counts[std::string(c)];
  std::vector<std::pair<std::vector<TokenId>, std::int64_t>> words;
  for (const auto& [s, n] : chunk_counts) {
    std::vector<TokenId> w;
    for (unsigned char b : s) w.push_back(b);
    words.emplace_back(w, n);
  }
  std::vector<std::pair<TokenId, TokenId>> merges;
  TokenId next = kFirstMergeId;
  while (next < vocab_size) {
    std::map<std::pair<TokenId, TokenId>, std::int64_t> counts;
    for (const auto& [w, n] : words) {
      for (std::size_t i = 0; i + 1 < w.size(); ++i) counts[{w[i], w[i + 1]}] += n;
    }
    std::pair<TokenId, TokenId> best{};
    std::int64_t best_count = 0;
    for (const auto& [p, n] : counts) {
      if (n > best_count) {  // std::map order makes the first maximum the smallest pair
        best = p;
        best_count = n;
      }
    }
    if (best_count < min_count || best_count == 0) break;
    merges.push_back(best);
    for (auto& [w, n] : words) {
      std::vector<TokenId> nw;
      for (std::size_t i = 0; i < w.size();) {
        if (i + 1 < w.size() && w[i] == best.first && w[i + 1] == best.second) {
          nw.push_back(next);
          i += 2;
        } else {
          nw.push_back(w[i++]);
        }
      }
      w = nw;
    }
    ++next;
  }
  return merges;
}

std::string fuzz_corpus(CounterRng& rng, int lines) {
  // Small alphabet so merges chain several levels deep.
  static constexpr std::string_view kWords[] = {"aab", "ab", "ba", "abab", "baaa", "كتب", "كتاب", "مكتب",
                                                "aaaa", "b", "كَتَبَ"};
  std::string s;
  for (int i = 0; i < lines; ++i) {
    const auto n = rng.uniform_int(1, 6);
    for (std::int64_t k = 0; k < n; ++k) {
      if (k) s += rng.uniform() < 0.8 ? " " : "  ";
      s += kWords[rng.uniform_int(0, 10)];
    }
    s += '\n';
  }
  return s;
}

TEST(Pretokenize, ChunksConcatenateToTheInput) {
  CounterRng rng(11);
  for (int i = 0; i < 2000; ++i) {
    const auto s = testing::fuzz_utf8(rng);
    std::string joined;
    for (auto c : pretokenize(s)) joined += c;
    ASSERT_EQ(joined, s);
  }
}

TEST(Pretokenize, LeadingWhitespaceAttachesToTheNextWord) {
  const auto chunks = pretokenize("ab  cd e ");
  ASSERT_EQ(chunks.size(), 4u);
  EXPECT_EQ(chunks[0], "ab");
  EXPECT_EQ(chunks[1], "  cd");
  EXPECT_EQ(chunks[2], " e");
  EXPECT_EQ(chunks[3], " ");
}

TEST(MergeTable, BaseVocabulary) {
  const MergeTable t;
  EXPECT_EQ(t.vocab_size(), 260);
  EXPECT_EQ(t.bytes_of(0x41), "A");
  EXPECT_TRUE(t.bytes_of(kBos).empty());
  EXPECT_TRUE(MergeTable::is_special(kPad));
  EXPECT_FALSE(MergeTable::is_special(kFirstMergeId));
  EXPECT_THROW(t.bytes_of(260), ValidationError);
  EXPECT_THROW(t.bytes_of(-1), ValidationError);
}

TEST(Train, HandCountedFirstMerges) {
  // "aaab aab ab": pair counts a-a = 3, a-b = 3 (chunks "aaab", " aab", " ab").
  // Tie -> smaller pair (97, 97) < (97, 98).
  const auto t = train("aaab aab ab", {.vocab_size = 261, .min_pair_count = 1});
  ASSERT_EQ(t.merges().size(), 1u);
  EXPECT_EQ(t.merges()[0], (std::pair<TokenId, TokenId>{'a', 'a'}));
  EXPECT_EQ(t.bytes_of(260), "aa");
}

TEST(Train, MatchesTheNaiveTrainer) {
  CounterRng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const auto corpus = fuzz_corpus(rng, 40);
    const int vocab = 260 + static_cast<int>(rng.uniform_int(1, 60));
    const auto t = train(corpus, {.vocab_size = vocab, .min_pair_count = 2});
    ASSERT_EQ(t.merges(), naive_merges(corpus, vocab, 2)) << "trial " << trial;
  }
}

TEST(Train, MatchesTheNaiveTrainerOnFuzzedText) {
  CounterRng rng(13);
  for (int trial = 0; trial < 5; ++trial) {
    std::string corpus;
    for (int i = 0; i < 60; ++i) corpus += testing::fuzz_utf8(rng, 30);
    const auto t = train(corpus, {.vocab_size = 400, .min_pair_count = 2});
    ASSERT_EQ(t.merges(), naive_merges(corpus, 400, 2)) << "trial " << trial;
  }
}

TEST(Train, StopsAtVocabSize) {
  CounterRng rng(14);
  const auto corpus = fuzz_corpus(rng, 200);
  EXPECT_EQ(train(corpus, {.vocab_size = 270}).vocab_size(), 270);
}

TEST(Train, IsDeterministic) {
  CounterRng rng(15);
  const auto corpus = fuzz_corpus(rng, 200);
  EXPECT_EQ(train(corpus, {.vocab_size = 300}), train(corpus, {.vocab_size = 300}));
}

TEST(Train, RejectsBadInput) {
  EXPECT_THROW(train("abc", {.vocab_size = 259}), ConfigError);
  EXPECT_THROW(train("", {.vocab_size = 300}), TrainingError);
}

TEST(Encode, UntrainedTableIsByteLevel) {
  const MergeTable t;
  const std::string s = "كتب x";
  const auto ids = encode(t, s);
  ASSERT_EQ(ids.size(), s.size());
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(ids[i], static_cast<unsigned char>(s[i]));
}

TEST(Encode, EmitsNoSpecialTokens) {
  CounterRng rng(16);
  const auto t = train(fuzz_corpus(rng, 100), {.vocab_size = 320});
  for (int i = 0; i < 500; ++i) {
    for (TokenId id : encode(t, testing::fuzz_utf8(rng))) ASSERT_FALSE(MergeTable::is_special(id));
  }
}

TEST(Encode, TokenBytesConcatenateToTheInput) {
  CounterRng rng(17);
  const auto t = train(fuzz_corpus(rng, 200), {.vocab_size = 330});
  for (int i = 0; i < 2000; ++i) {
    const auto s = testing::fuzz_utf8(rng);
    std::string joined;
    for (TokenId id : encode(t, s)) joined += t.bytes_of(id);
    ASSERT_EQ(joined, s);
  }
}

TEST(RoundTrip, FuzzedArabicWeightedText) {
  CounterRng rng(18);
  std::string corpus;
  for (int i = 0; i < 3000; ++i) corpus += testing::fuzz_utf8(rng, 30);
  const auto t = train(corpus, {.vocab_size = 600});
  for (int i = 0; i < 10000; ++i) {
    const auto s = testing::fuzz_utf8(rng, 60);
    ASSERT_EQ(decode(t, encode(t, s)), s);
  }
}

TEST(Decode, SpecialTokensContributeNothing) {
  const MergeTable t;
  const std::vector<TokenId> ids = {kBos, 'h', 'i', kEos, kPad};
  EXPECT_EQ(decode(t, ids), "hi");
}

TEST(Decode, InvalidUtf8BecomesReplacementCharacters) {
  const MergeTable t;
  const std::vector<TokenId> ids = {0xD9};  // lead byte of a two-byte sequence
  EXPECT_EQ(decode(t, ids), "\xEF\xBF\xBD");
}

TEST(Decode, RejectsOutOfRangeIds) {
  const MergeTable t;
  const std::vector<TokenId> ids = {5000};
  EXPECT_THROW(decode(t, ids), ValidationError);
}

TEST(Serialization, SaveLoadRoundTrip) {
  CounterRng rng(19);
  const auto t = train(fuzz_corpus(rng, 100), {.vocab_size = 300});
  const auto path = std::filesystem::temp_directory_path() / "hatformer_bbpe_test.json";
  t.save(path);
  const auto back = MergeTable::load(path);
  EXPECT_EQ(back, t);
  EXPECT_EQ(back.vocab_size(), t.vocab_size());
  for (TokenId id = 0; id < t.vocab_size(); ++id) ASSERT_EQ(back.bytes_of(id), t.bytes_of(id));
  std::filesystem::remove(path);
}

TEST(Serialization, RejectsTamperedFiles) {
  CounterRng rng(20);
  auto j = train(fuzz_corpus(rng, 100), {.vocab_size = 290}).to_json();
  auto wrong_schema = j;
  wrong_schema["schema"] = "other/1";
  EXPECT_THROW(MergeTable::from_json(wrong_schema), ValidationError);
  auto wrong_size = j;
  wrong_size["vocab_size"] = 1000;
  EXPECT_THROW(MergeTable::from_json(wrong_size), ValidationError);
  auto wrong_special = j;
  wrong_special["specials"]["<pad>"] = 300;
  EXPECT_THROW(MergeTable::from_json(wrong_special), ValidationError);
}

TEST(Truncated, KeepsThePrefixOfMerges) {
  CounterRng rng(21);
  const auto t = train(fuzz_corpus(rng, 100), {.vocab_size = 300});
  const auto p = t.truncated(10);
  ASSERT_EQ(p.vocab_size(), 270);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(p.merges()[i], t.merges()[i]);
}

TEST(Compactness, RatioOfTokenCounts) {
  CounterRng rng(22);
  const auto corpus = fuzz_corpus(rng, 300);
  const MergeTable base;
  const auto custom = train(corpus, {.vocab_size = 300});
  const double expected = static_cast<double>(encode(base, corpus).size()) /
                          static_cast<double>(encode(custom, corpus).size());
  EXPECT_DOUBLE_EQ(compactness_ratio(base, custom, corpus), expected);
  EXPECT_GT(expected, 1.0);
  EXPECT_THROW(compactness_ratio(base, custom, ""), ValidationError);
}

}  // namespace
}  // namespace hatformer::bbpe
