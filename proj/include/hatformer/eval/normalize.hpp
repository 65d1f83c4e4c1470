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
 * @file normalize.hpp
 * @brief Postprocessing tiers applied before CER scoring.
 *
 * Tiers always run in this order, whichever are enabled:
 *
 *   1. collapse whitespace
 *   2. remove diacritics
 *   3. replace without context
 *   4. replace with context
 *
 * Deleting a free-standing mark between two spaces recreates a whitespace
 * run, so when tier 1 is enabled it is re-applied after tier 2. With that and
 * the table checks in ReplaceTable::validate(), a whole policy is idempotent.
 */

#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hatformer/error.hpp"
#include "hatformer/utf8.hpp"

namespace hatformer::eval {

/// Arabic tashkeel, U+064B..U+0652.
inline bool is_tashkeel(char32_t c) { return c >= 0x064B && c <= 0x0652; }

/// Runs of whitespace become one space; leading and trailing whitespace go.
inline std::u32string collapse_whitespace(std::u32string_view s) {
  std::u32string out;
  out.reserve(s.size());
  bool pending = false;
  for (char32_t c : s) {
    if (utf8::is_space(c)) {
      pending = !out.empty();
      continue;
    }
    if (pending) out.push_back(U' ');
    pending = false;
    out.push_back(c);
  }
  return out;
}

inline std::u32string remove_diacritics(std::u32string_view s, const std::set<char32_t>& extras = {}) {
  std::u32string out;
  out.reserve(s.size());
  for (char32_t c : s) {
    if (!is_tashkeel(c) && !extras.contains(c)) out.push_back(c);
  }
  return out;
}

/// Single code point to single code point substitution table.
struct ReplaceTable {
  std::map<char32_t, char32_t> map;

  bool empty() const { return map.empty(); }

  /// Rejects chains (a value that is also a key) and values that another
  /// tier would rewrite again (whitespace, tashkeel).
  void validate() const {
    for (const auto& [from, to] : map) {
      if (map.contains(to)) {
        throw ConfigError("replacement table maps U+" + hex(from) + " to U+" + hex(to) +
                          ", which is itself replaced");
      }
      if (utf8::is_space(to) || is_tashkeel(to)) {
        throw ConfigError("replacement target U+" + hex(to) + " is whitespace or a diacritic");
      }
    }
  }

  /// JSON object {"<from>": "<to>"} where both sides are one code point.
  static ReplaceTable from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("replacement table must be a JSON object");
    ReplaceTable t;
    for (const auto& [k, v] : j.items()) {
      if (!v.is_string()) throw ConfigError("replacement value for '" + k + "' is not a string");
      const auto from = utf8::decode(k);
      const auto to = utf8::decode(v.get<std::string>());
      if (from.size() != 1 || to.size() != 1) {
        throw ConfigError("replacement entries must map one code point to one code point ('" + k + "')");
      }
      t.map[from[0]] = to[0];
    }
    t.validate();
    return t;
  }

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [from, to] : map) {
      std::string k;
      std::string v;
      utf8::append(k, from);
      utf8::append(v, to);
      j[k] = v;
    }
    return j;
  }

  static ReplaceTable load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read replacement table " + path.string());
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("malformed replacement table " + path.string() + ": " + e.what());
    }
  }

private:
  static std::string hex(char32_t c) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04X", static_cast<unsigned>(c));
    return buf;
  }
};

/// Hamza-bearing alef forms and alef wasla become bare alef.
inline ReplaceTable default_without_context_table() {
  return {{{0x0622, 0x0627}, {0x0623, 0x0627}, {0x0625, 0x0627}, {0x0671, 0x0627}}};
}

/// Ta marbuta -> ha, alef maqsura -> ya, hamza on waw / ya -> hamza.
inline ReplaceTable default_with_context_table() {
  return {{{0x0624, 0x0621}, {0x0626, 0x0621}, {0x0629, 0x0647}, {0x0649, 0x064A}}};
}

inline std::u32string replace_tier(std::u32string_view s, const ReplaceTable& table) {
  std::u32string out(s);
  if (table.empty()) return out;
  for (auto& c : out) {
    if (const auto it = table.map.find(c); it != table.map.end()) c = it->second;
  }
  return out;
}

struct NormalizationPolicy {
  bool collapse_whitespace = false;
  bool remove_diacritics = false;
  bool replace_without_context = false;
  bool replace_with_context = false;
  ReplaceTable without_context = default_without_context_table();
  ReplaceTable with_context = default_with_context_table();
  std::set<char32_t> extra_diacritics;

  static NormalizationPolicy identity() { return {}; }

  bool is_identity() const {
    return !collapse_whitespace && !remove_diacritics && !replace_without_context && !replace_with_context;
  }

  void validate() const {
    without_context.validate();
    with_context.validate();
    for (const auto& [from, to] : with_context.map) {
      if (without_context.map.contains(to)) {
        throw ConfigError("with-context tier produces a character the without-context tier replaces");
      }
    }
    for (const auto& [from, to] : without_context.map) {
      if (extra_diacritics.contains(to)) throw ConfigError("replacement target is a configured diacritic");
    }
    for (const auto& [from, to] : with_context.map) {
      if (extra_diacritics.contains(to)) throw ConfigError("replacement target is a configured diacritic");
    }
    for (char32_t c : extra_diacritics) {
      if (utf8::is_space(c)) throw ConfigError("whitespace cannot be configured as a diacritic");
    }
  }

  /// Accepts the four toggles plus optional "tables" and "extra_diacritics".
  /// Missing toggles default to false; unknown keys are rejected.
  static NormalizationPolicy from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("policy must be a JSON object");
    NormalizationPolicy p;
    for (const auto& [k, v] : j.items()) {
      if (k == "collapse_whitespace" || k == "remove_diacritics" || k == "replace_without_context" ||
          k == "replace_with_context") {
        if (!v.is_boolean()) throw ConfigError("policy field '" + k + "' must be a boolean");
      } else if (k != "tables" && k != "extra_diacritics") {
        throw ConfigError("unknown policy field '" + k + "'");
      }
    }
    p.collapse_whitespace = j.value("collapse_whitespace", false);
    p.remove_diacritics = j.value("remove_diacritics", false);
    p.replace_without_context = j.value("replace_without_context", false);
    p.replace_with_context = j.value("replace_with_context", false);
    if (j.contains("tables")) {
      const auto& t = j.at("tables");
      if (!t.is_object()) throw ConfigError("policy 'tables' must be an object");
      for (const auto& [k, v] : t.items()) {
        if (k == "without_context") {
          p.without_context = ReplaceTable::from_json(v);
        } else if (k == "with_context") {
          p.with_context = ReplaceTable::from_json(v);
        } else {
          throw ConfigError("unknown table '" + k + "'");
        }
      }
    }
    if (j.contains("extra_diacritics")) {
      const auto& e = j.at("extra_diacritics");
      if (!e.is_array()) throw ConfigError("'extra_diacritics' must be an array of strings");
      for (const auto& s : e) {
        if (!s.is_string()) throw ConfigError("'extra_diacritics' must be an array of strings");
        const auto cps = utf8::decode(s.get<std::string>());
        if (cps.size() != 1) throw ConfigError("each extra diacritic must be one code point");
        p.extra_diacritics.insert(cps[0]);
      }
    }
    p.validate();
    return p;
  }

  nlohmann::json to_json() const {
    nlohmann::json extras = nlohmann::json::array();
    for (char32_t c : extra_diacritics) {
      std::string s;
      utf8::append(s, c);
      extras.push_back(s);
    }
    return {{"collapse_whitespace", collapse_whitespace},
            {"remove_diacritics", remove_diacritics},
            {"replace_without_context", replace_without_context},
            {"replace_with_context", replace_with_context},
            {"tables", {{"without_context", without_context.to_json()}, {"with_context", with_context.to_json()}}},
            {"extra_diacritics", extras}};
  }
};

/// Loads replace_without_context.json / replace_with_context.json from a
/// directory, keeping the built-in default for any file that is absent.
inline void load_tables(NormalizationPolicy& policy, const std::filesystem::path& dir) {
  if (const auto p = dir / "replace_without_context.json"; std::filesystem::exists(p)) {
    policy.without_context = ReplaceTable::load(p);
  }
  if (const auto p = dir / "replace_with_context.json"; std::filesystem::exists(p)) {
    policy.with_context = ReplaceTable::load(p);
  }
  policy.validate();
}

inline std::u32string apply(const NormalizationPolicy& policy, std::u32string_view s) {
  std::u32string out(s);
  if (policy.collapse_whitespace) out = eval::collapse_whitespace(out);
  if (policy.remove_diacritics) {
    out = eval::remove_diacritics(out, policy.extra_diacritics);
    if (policy.collapse_whitespace) out = eval::collapse_whitespace(out);
  }
  if (policy.replace_without_context) out = replace_tier(out, policy.without_context);
  if (policy.replace_with_context) out = replace_tier(out, policy.with_context);
  return out;
}

inline std::string apply(const NormalizationPolicy& policy, std::string_view s) {
  return utf8::encode(eval::apply(policy, utf8::decode(s)));
}

}  // namespace hatformer::eval
