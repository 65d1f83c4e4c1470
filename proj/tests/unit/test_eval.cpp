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
#include <functional>
#include <map>

#include "hatformer/eval/cer.hpp"
#include "support/fuzz.hpp"

namespace hatformer::eval {
namespace {

int recursive_distance(std::u32string_view a, std::u32string_view b) {
  std::map<std::pair<std::size_t, std::size_t>, int> memo;
  std::function<int(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) -> int {
    if (i == a.size()) return static_cast<int>(b.size() - j);
    if (j == b.size()) return static_cast<int>(a.size() - i);
    if (auto it = memo.find({i, j}); it != memo.end()) return it->second;
    int best = go(i + 1, j + 1) + (a[i] == b[j] ? 0 : 1);
    best = std::min(best, go(i + 1, j) + 1);
    best = std::min(best, go(i, j + 1) + 1);
    return memo[{i, j}] = best;
  };
  return go(0, 0);
}

std::vector<std::u32string> all_strings(std::u32string_view alphabet, int max_len) {
  std::vector<std::u32string> out = {U""};
  std::size_t begin = 0;
  for (int len = 1; len <= max_len; ++len) {
    const std::size_t end = out.size();
    for (std::size_t i = begin; i < end; ++i) {
      for (char32_t c : alphabet) out.push_back(out[i] + c);
    }
    begin = end;
  }
  return out;
}

void expect_consistent(const Alignment& a, std::u32string_view ref, std::u32string_view pred) {
  int s = 0, d = 0, ins = 0, ref_seen = 0, pred_seen = 0;
  for (const auto& op : a.ops) {
    switch (op.kind) {
      case OpKind::kMatch:
        ASSERT_EQ(ref[op.ref], pred[op.pred]);
        ++ref_seen, ++pred_seen;
        break;
      case OpKind::kSubstitute:
        ASSERT_NE(ref[op.ref], pred[op.pred]);
        ++s, ++ref_seen, ++pred_seen;
        break;
      case OpKind::kDelete: ++d, ++ref_seen; break;
      case OpKind::kInsert: ++ins, ++pred_seen; break;
    }
  }
  ASSERT_EQ(ref_seen, static_cast<int>(ref.size()));
  ASSERT_EQ(pred_seen, static_cast<int>(pred.size()));
  ASSERT_EQ(s, a.substitutions);
  ASSERT_EQ(d, a.deletions);
  ASSERT_EQ(ins, a.insertions);
  ASSERT_EQ(replay(a.ops, ref, pred), ref);
}

TEST(Align, ExhaustiveShortStringsMatchTheRecursiveOracle) {
  const auto strings = all_strings(U"abc", 4);
  for (const auto& r : strings) {
    for (const auto& p : strings) {
      const auto a = align(r, p);
      ASSERT_EQ(a.errors(), recursive_distance(r, p)) << utf8::encode(r) << " / " << utf8::encode(p);
      expect_consistent(a, r, p);
    }
  }
}

TEST(Align, RandomLongerPairs) {
  CounterRng rng(31);
  for (int i = 0; i < 500; ++i) {
    const auto r = testing::fuzz_u32(rng, 25);
    const auto p = rng.uniform() < 0.5 ? testing::fuzz_u32(rng, 25) : r.substr(0, r.size() / 2) + U"x";
    const auto a = align(r, p);
    ASSERT_EQ(a.errors(), recursive_distance(r, p));
    expect_consistent(a, r, p);
  }
}

TEST(Align, HandWorkedExamples) {
  // kitten -> sitting: s/k, i/e, insert g
  const auto a = align(U"kitten", U"sitting");
  EXPECT_EQ(a.substitutions, 2);
  EXPECT_EQ(a.deletions, 0);
  EXPECT_EQ(a.insertions, 1);
  const auto b = align(U"abc", U"");
  EXPECT_EQ(b.deletions, 3);
  const auto c = align(U"", U"ab");
  EXPECT_EQ(c.insertions, 2);
}

TEST(Align, TieBreakPrefersSubstitutionOverIndel) {
  const auto a = align(U"a", U"b");
  ASSERT_EQ(a.ops.size(), 1u);
  EXPECT_EQ(a.ops[0], (AlignOp{OpKind::kSubstitute, 0, 0}));
}

TEST(LineCer, Basic) {
  EXPECT_DOUBLE_EQ(line_cer(U"abcd", U"abxd"), 0.25);
  EXPECT_DOUBLE_EQ(line_cer(U"ab", U"abab"), 1.0);
  EXPECT_THROW(line_cer(U"", U"a"), ValidationError);
}

TEST(LineCer, CountsCodePointsNotBytes) {
  // Three Arabic letters are six UTF-8 bytes.
  EXPECT_DOUBLE_EQ(line_cer(utf8::decode("كتب"), utf8::decode("كتت")), 1.0 / 3.0);
}

TEST(Normalize, CollapseWhitespace) {
  EXPECT_EQ(collapse_whitespace(U"  a \t\n b  "), U"a b");
  EXPECT_EQ(collapse_whitespace(U"a  b"), U"a b");
  EXPECT_EQ(collapse_whitespace(U"   "), U"");
}

TEST(Normalize, RemoveDiacritics) {
  EXPECT_EQ(utf8::encode(remove_diacritics(utf8::decode("كَتَبَ"))), "كتب");
  EXPECT_EQ(remove_diacritics(U"aٰb", {0x0670}), U"ab");
  EXPECT_EQ(remove_diacritics(U"aٰb"), U"aٰb");
}

TEST(Normalize, DefaultTables) {
  EXPECT_EQ(replace_tier(U"أإآٱ", default_without_context_table()), U"اااا");
  EXPECT_EQ(replace_tier(U"ةى", default_with_context_table()), U"هي");
}

TEST(Normalize, TiersRunInFixedOrder) {
  // without-context maps x -> y and with-context maps y -> z, so x only
  // reaches z if the without-context tier runs first.
  NormalizationPolicy p;
  p.replace_without_context = true;
  p.replace_with_context = true;
  p.without_context = {{{U'x', U'y'}}};
  p.with_context = {{{U'y', U'z'}}};
  p.validate();
  EXPECT_EQ(eval::apply(p, std::u32string_view(U"xy")), U"zz");
}

TEST(Normalize, DiacriticsRemovedBeforeReplacement) {
  NormalizationPolicy p;
  p.remove_diacritics = true;
  p.replace_without_context = true;
  // Configured extra diacritic between two letters: removed first, so the
  // replacement sees the bare letters.
  p.extra_diacritics = {0x0670};
  EXPECT_EQ(eval::apply(p, std::u32string_view(U"أٰ")), U"ا");
}

TEST(Normalize, RecollapsesAfterRemovingAFreeStandingMark) {
  NormalizationPolicy p;
  p.collapse_whitespace = true;
  p.remove_diacritics = true;
  EXPECT_EQ(eval::apply(p, std::u32string_view(U"a َ b")), U"a b");
}

TEST(Normalize, IdentityPolicyChangesNothing) {
  CounterRng rng(32);
  const auto p = NormalizationPolicy::identity();
  EXPECT_TRUE(p.is_identity());
  for (int i = 0; i < 1000; ++i) {
    const auto s = testing::fuzz_u32(rng);
    ASSERT_EQ(eval::apply(p, s), s);
  }
}

TEST(Normalize, EveryTierAndEveryPolicyIsIdempotent) {
  CounterRng rng(33);
  for (int mask = 0; mask < 16; ++mask) {
    NormalizationPolicy p;
    p.collapse_whitespace = mask & 1;
    p.remove_diacritics = mask & 2;
    p.replace_without_context = mask & 4;
    p.replace_with_context = mask & 8;
    for (int i = 0; i < 500; ++i) {
      const auto once = eval::apply(p, testing::fuzz_u32(rng));
      ASSERT_EQ(eval::apply(p, once), once) << "policy mask " << mask;
    }
  }
}

TEST(Normalize, TableValidation) {
  EXPECT_THROW((ReplaceTable{{{U'a', U'b'}, {U'b', U'c'}}}.validate()), ConfigError);
  EXPECT_THROW((ReplaceTable{{{U'a', U' '}}}.validate()), ConfigError);
  EXPECT_THROW((ReplaceTable{{{U'a', 0x064E}}}.validate()), ConfigError);
  EXPECT_THROW(ReplaceTable::from_json(nlohmann::json{{"ab", "c"}}), ConfigError);
  EXPECT_THROW(ReplaceTable::from_json(nlohmann::json::array()), ConfigError);
  NormalizationPolicy p;
  p.with_context = {{{U'q', 0x0623}}};  // produces something the earlier tier replaces
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(Normalize, ShippedTablesLoadAndValidate) {
  NormalizationPolicy p;
  load_tables(p, std::filesystem::path(HATFORMER_DATA_DIR) / "tables");
  EXPECT_FALSE(p.without_context.empty());
  EXPECT_FALSE(p.with_context.empty());
}

TEST(Policy, JsonRoundTripAndStrictness) {
  const auto p = NormalizationPolicy::from_json({{"collapse_whitespace", true}, {"replace_with_context", true}});
  EXPECT_TRUE(p.collapse_whitespace);
  EXPECT_FALSE(p.remove_diacritics);
  EXPECT_TRUE(p.replace_with_context);
  const auto q = NormalizationPolicy::from_json(p.to_json());
  EXPECT_EQ(q.to_json(), p.to_json());
  EXPECT_THROW(NormalizationPolicy::from_json({{"lowercase", true}}), ConfigError);
  EXPECT_THROW(NormalizationPolicy::from_json({{"remove_diacritics", 1}}), ConfigError);
  EXPECT_THROW(NormalizationPolicy::from_json(nlohmann::json::array()), ConfigError);
}

TEST(Cer, IdentityPolicyReproducesRawScores) {
  CounterRng rng(34);
  std::vector<std::pair<std::string, std::string>> pairs;
  long long errors = 0, chars = 0;
  for (int i = 0; i < 300; ++i) {
    auto r = testing::fuzz_u32(rng, 30);
    if (r.empty()) r = U"x";
    const auto p = testing::fuzz_u32(rng, 30);
    errors += recursive_distance(r, p);
    chars += static_cast<long long>(r.size());
    pairs.emplace_back(utf8::encode(r), utf8::encode(p));
  }
  const auto s = score_corpus(pairs, NormalizationPolicy::identity());
  EXPECT_EQ(s.errors, errors);
  EXPECT_EQ(s.ref_chars, chars);
  EXPECT_DOUBLE_EQ(s.cer, static_cast<double>(errors) / static_cast<double>(chars));
  const auto again = rescore(s.records, NormalizationPolicy::identity());
  EXPECT_DOUBLE_EQ(again.cer, s.cer);
}

TEST(Cer, CorpusVersusPerLineAggregation) {
  const std::vector<std::pair<std::string, std::string>> pairs = {{"ab", "ab"}, {"abcdefgh", ""}};
  EXPECT_DOUBLE_EQ(score_corpus(pairs, {}, Aggregation::kCorpus).cer, 8.0 / 10.0);
  EXPECT_DOUBLE_EQ(score_corpus(pairs, {}, Aggregation::kPerLine).cer, 0.5);
}

TEST(Cer, EmptyReferencesAreExcludedFromPerLineMean) {
  const std::vector<std::pair<std::string, std::string>> pairs = {{"", "xyz"}, {"ab", "ax"}};
  const auto s = score_corpus(pairs, {}, Aggregation::kPerLine);
  EXPECT_DOUBLE_EQ(s.cer, 0.5);
  EXPECT_FALSE(s.records[0].cer.has_value());
  EXPECT_EQ(s.records[0].insertions, 3);
}

TEST(Cer, RejectsUnscorableInput) {
  EXPECT_THROW(score_corpus({}, {}), ValidationError);
  const std::vector<std::pair<std::string, std::string>> pairs = {{"", "a"}};
  EXPECT_THROW(score_corpus(pairs, {}), ValidationError);
}

TEST(Cer, NormalizationLowersErrors) {
  const std::vector<std::pair<std::string, std::string>> pairs = {{"كَتَبَ  أحمد", "كتب احمد"}};
  NormalizationPolicy p;
  p.collapse_whitespace = p.remove_diacritics = p.replace_without_context = true;
  EXPECT_GT(score_corpus(pairs, {}).cer, 0.0);
  EXPECT_EQ(score_corpus(pairs, p).cer, 0.0);
}

TEST(Records, JsonlRoundTrip) {
  auto r = score_line("line-1", "كتاب", "كتب");
  r.image = "images/line-1.png";
  std::vector<EvalRecord> records = {r, score_line("line-2", "", "x")};
  const auto path = std::filesystem::temp_directory_path() / "hatformer_records_test.jsonl";
  write_jsonl(path, records);
  const auto back = read_jsonl(path);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(to_json(back[0]), to_json(records[0]));
  EXPECT_EQ(to_json(back[1]), to_json(records[1]));
  EXPECT_TRUE(to_json(back[1])["cer"].is_null());
  std::filesystem::remove(path);
}

TEST(Records, RejectUnknownSchema) {
  auto j = to_json(score_line("a", "x", "y"));
  j["schema"] = "something/2";
  EXPECT_THROW(record_from_json(j), ValidationError);
}

}  // namespace
}  // namespace hatformer::eval
