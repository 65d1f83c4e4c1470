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
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "hatformer/error.hpp"

namespace hatformer::eval {

enum class OpKind : std::uint8_t { kMatch, kSubstitute, kDelete, kInsert };

inline std::string_view to_string(OpKind k) {
  switch (k) {
    case OpKind::kMatch: return "match";
    case OpKind::kSubstitute: return "substitute";
    case OpKind::kDelete: return "delete";
    case OpKind::kInsert: return "insert";
  }
  return "?";
}

inline OpKind op_from_string(std::string_view s) {
  if (s == "match") return OpKind::kMatch;
  if (s == "substitute") return OpKind::kSubstitute;
  if (s == "delete") return OpKind::kDelete;
  if (s == "insert") return OpKind::kInsert;
  throw ValidationError("unknown alignment op '" + std::string(s) + "'");
}

/// One alignment step. `ref` is -1 for insertions, `pred` is -1 for
/// deletions (a reference character missing from the prediction).
struct AlignOp {
  OpKind kind;
  int ref;
  int pred;
  friend bool operator==(const AlignOp&, const AlignOp&) = default;
};

struct Alignment {
  int substitutions = 0;
  int deletions = 0;
  int insertions = 0;
  std::vector<AlignOp> ops;

  int errors() const { return substitutions + deletions + insertions; }
};

/// Unit-cost Levenshtein alignment of `pred` against `ref`, over Unicode
/// scalar values. On equal cost the backtrace prefers
/// match > substitute > delete > insert.
inline Alignment align(std::u32string_view ref, std::u32string_view pred) {
  const std::size_t n = ref.size();
  const std::size_t m = pred.size();
  const std::size_t w = m + 1;
  std::vector<int> d((n + 1) * w);
  for (std::size_t j = 0; j <= m; ++j) d[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    d[i * w] = static_cast<int>(i);
    for (std::size_t j = 1; j <= m; ++j) {
      const int diag = d[(i - 1) * w + j - 1] + (ref[i - 1] == pred[j - 1] ? 0 : 1);
      const int up = d[(i - 1) * w + j] + 1;
      const int left = d[i * w + j - 1] + 1;
      d[i * w + j] = std::min(diag, std::min(up, left));
    }
  }

  Alignment a;
  a.ops.reserve(n + m);
  std::size_t i = n;
  std::size_t j = m;
  while (i > 0 || j > 0) {
    const int here = d[i * w + j];
    if (i > 0 && j > 0) {
      const bool same = ref[i - 1] == pred[j - 1];
      const int diag = d[(i - 1) * w + j - 1];
      if (same && diag == here) {
        a.ops.push_back({OpKind::kMatch, static_cast<int>(i - 1), static_cast<int>(j - 1)});
        --i; --j;
        continue;
      }
      if (!same && diag + 1 == here) {
        a.ops.push_back({OpKind::kSubstitute, static_cast<int>(i - 1), static_cast<int>(j - 1)});
        ++a.substitutions;
        --i; --j;
        continue;
      }
    }
    if (i > 0 && d[(i - 1) * w + j] + 1 == here) {
      a.ops.push_back({OpKind::kDelete, static_cast<int>(i - 1), -1});
      ++a.deletions;
      --i;
      continue;
    }
    a.ops.push_back({OpKind::kInsert, -1, static_cast<int>(j - 1)});
    ++a.insertions;
    --j;
  }
  std::reverse(a.ops.begin(), a.ops.end());
  return a;
}

/// Rebuilds the reference from the prediction and the alignment; used to
/// check that an alignment is faithful.
inline std::u32string replay(const std::vector<AlignOp>& ops, std::u32string_view ref, std::u32string_view pred) {
  std::u32string out;
  for (const auto& op : ops) {
    switch (op.kind) {
      case OpKind::kMatch: out.push_back(pred[static_cast<std::size_t>(op.pred)]); break;
      case OpKind::kSubstitute:
      case OpKind::kDelete: out.push_back(ref[static_cast<std::size_t>(op.ref)]); break;
      case OpKind::kInsert: break;
    }
  }
  return out;
}

/// Character error rate of one line; the reference must be non-empty.
inline double line_cer(std::u32string_view ref, std::u32string_view pred) {
  if (ref.empty()) throw ValidationError("CER is undefined for an empty reference");
  return static_cast<double>(align(ref, pred).errors()) / static_cast<double>(ref.size());
}

}  // namespace hatformer::eval
