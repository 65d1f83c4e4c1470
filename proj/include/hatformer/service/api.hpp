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
 * @file api.hpp
 * @brief Read-only views over a run directory, independent of HTTP.
 *
 * A run directory must contain eval.jsonl. Optional: meta.json (or
 * config.json) returned by /api/meta, and per-record image and attention
 * files referenced from the records by relative path.
 */

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hatformer/eval/cer.hpp"
#include "hatformer/service/artifacts.hpp"

namespace hatformer::service {

struct Response {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";

  static Response json(const nlohmann::json& j, int status = 200) { return {status, j.dump(), "application/json"}; }
  static Response error(int status, const std::string& kind, const std::string& message) {
    return json({{"error", {{"kind", kind}, {"message", message}}}}, status);
  }
};

/// Records of one run, loaded once and never modified.
class RunStore {
public:
  explicit RunStore(std::filesystem::path dir) : dir_(std::move(dir)) {
    const auto eval_path = dir_ / "eval.jsonl";
    if (!std::filesystem::exists(eval_path)) {
      problem_ = "run directory has no eval.jsonl";
      return;
    }
    try {
      records_ = eval::read_jsonl(eval_path);
    } catch (const Error& e) {
      problem_ = e.what();
      return;
    }
    for (std::size_t i = 0; i < records_.size(); ++i) {
      if (!index_.emplace(records_[i].id, i).second) {
        problem_ = "duplicate record id '" + records_[i].id + "'";
        return;
      }
      errors_ += records_[i].errors();
      ref_chars_ += records_[i].ref_chars;
    }
    if (ref_chars_ == 0) problem_ = "eval.jsonl has no scorable records";
    for (const char* name : {"meta.json", "config.json"}) {
      if (std::ifstream in(dir_ / name); in) {
        try {
          meta_ = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception&) {
          problem_ = std::string(name) + " is not valid JSON";
        }
        break;
      }
    }
  }

  bool complete() const { return problem_.empty(); }
  const std::string& problem() const { return problem_; }
  const std::filesystem::path& dir() const { return dir_; }
  const std::vector<eval::EvalRecord>& records() const { return records_; }
  const nlohmann::json& meta() const { return meta_; }
  long long errors() const { return errors_; }
  long long ref_chars() const { return ref_chars_; }
  /// Corpus CER of the stored texts, i.e. under the scoring of the run.
  double base_cer() const { return static_cast<double>(errors_) / static_cast<double>(ref_chars_); }

  const eval::EvalRecord* find(const std::string& id) const {
    const auto it = index_.find(id);
    return it == index_.end() ? nullptr : &records_[it->second];
  }

  /// Resolves a record-relative artifact path, refusing to leave the run directory.
  std::optional<std::filesystem::path> artifact(const std::string& rel) const {
    if (rel.empty()) return std::nullopt;
    const auto p = std::filesystem::weakly_canonical(dir_ / rel);
    const auto root = std::filesystem::weakly_canonical(dir_);
    const auto [r, _] = std::mismatch(root.begin(), root.end(), p.begin(), p.end());
    if (r != root.end() || !std::filesystem::is_regular_file(p)) return std::nullopt;
    return p;
  }

private:
  std::filesystem::path dir_;
  std::vector<eval::EvalRecord> records_;
  std::map<std::string, std::size_t> index_;
  nlohmann::json meta_ = nlohmann::json::object();
  std::string problem_;
  long long errors_ = 0;
  long long ref_chars_ = 0;
};

namespace detail {

inline std::optional<long long> parse_int(const std::string& s) {
  long long v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<double> parse_double(const std::string& s) {
  try {
    std::size_t n = 0;
    const double v = std::stod(s, &n);
    if (n != s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

inline nlohmann::json summary(const eval::EvalRecord& r) {
  return {{"id", r.id},
          {"reference", r.reference},
          {"prediction", r.prediction},
          {"S", r.substitutions},
          {"D", r.deletions},
          {"I", r.insertions},
          {"N", r.ref_chars},
          {"cer", r.cer ? nlohmann::json(*r.cer) : nlohmann::json(nullptr)},
          {"has_image", !r.image.empty()},
          {"has_attention", !r.attention.empty()}};
}

}  // namespace detail

using Params = std::map<std::string, std::string>;

/// Handlers for the endpoints; each maps request inputs to a Response.
class Api {
public:
  static constexpr long long kMaxPage = 1000;

  explicit Api(const RunStore& store) : store_(store) {}

  Response meta() const {
    nlohmann::json j = {{"schema", "hatformer.run/1"},
                        {"run", store_.dir().filename().string()},
                        {"complete", store_.complete()},
                        {"config", store_.meta()}};
    if (store_.complete()) {
      j["records"] = store_.records().size();
      j["base_cer"] = store_.base_cer();
      j["errors"] = store_.errors();
      j["ref_chars"] = store_.ref_chars();
    } else {
      j["problem"] = store_.problem();
    }
    return Response::json(j);
  }

  /// offset, limit (default 50, at most 1000), sort = index | cer_desc |
  /// cer_asc, min_cer = keep records with CER strictly above the value.
  Response records(const Params& q) const {
    if (auto r = incomplete()) return *r;
    long long offset = 0, limit = 50;
    if (const auto it = q.find("offset"); it != q.end()) {
      const auto v = detail::parse_int(it->second);
      if (!v || *v < 0) return Response::error(400, "bad_request", "offset must be a non-negative integer");
      offset = *v;
    }
    if (const auto it = q.find("limit"); it != q.end()) {
      const auto v = detail::parse_int(it->second);
      if (!v || *v < 0 || *v > kMaxPage) {
        return Response::error(400, "bad_request", "limit must be an integer in [0, 1000]");
      }
      limit = *v;
    }
    std::string sort = "index";
    if (const auto it = q.find("sort"); it != q.end()) sort = it->second;
    if (sort != "index" && sort != "cer_desc" && sort != "cer_asc") {
      return Response::error(400, "bad_request", "sort must be index, cer_desc or cer_asc");
    }
    std::optional<double> min_cer;
    if (const auto it = q.find("min_cer"); it != q.end()) {
      min_cer = detail::parse_double(it->second);
      if (!min_cer) return Response::error(400, "bad_request", "min_cer must be a number");
    }

    const auto& recs = store_.records();
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < recs.size(); ++i) {
      if (!min_cer || (recs[i].cer && *recs[i].cer > *min_cer)) order.push_back(i);
    }
    if (sort != "index") {
      const bool desc = sort == "cer_desc";
      // Records without a CER sort last either way; ties keep file order.
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& x = recs[a].cer;
        const auto& y = recs[b].cer;
        if (!x || !y) return x.has_value() && !y.has_value();
        return desc ? *x > *y : *x < *y;
      });
    }
    nlohmann::json page = nlohmann::json::array();
    for (auto i = static_cast<std::size_t>(std::min<long long>(offset, static_cast<long long>(order.size())));
         i < order.size() && static_cast<long long>(page.size()) < limit; ++i) {
      page.push_back(detail::summary(recs[order[i]]));
    }
    return Response::json({{"total", order.size()}, {"offset", offset}, {"limit", limit}, {"records", page}});
  }

  Response record(const std::string& id) const {
    if (auto r = incomplete()) return *r;
    const auto* rec = store_.find(id);
    if (!rec) return Response::error(404, "not_found", "unknown record id '" + id + "'");
    auto j = eval::to_json(*rec);
    j["image_url"] = store_.artifact(rec->image) ? nlohmann::json("/api/images/" + id) : nlohmann::json(nullptr);
    j["has_attention"] = store_.artifact(rec->attention).has_value();
    if (j["has_attention"]) {
      try {
        const auto a = load_attention(*store_.artifact(rec->attention));
        j["tokens"] = a.tokens;
        j["pieces"] = a.pieces;
      } catch (const Error& e) {
        return Response::error(409, "incomplete_run", "attention trace for '" + id + "': " + e.what());
      }
    }
    return Response::json(j);
  }

  Response image(const std::string& id) const {
    if (auto r = incomplete()) return *r;
    const auto* rec = store_.find(id);
    if (!rec) return Response::error(404, "not_found", "unknown record id '" + id + "'");
    const auto path = store_.artifact(rec->image);
    if (!path) return Response::error(404, "not_found", "record '" + id + "' has no image");
    std::ifstream in(*path, std::ios::binary);
    return {200, std::string(std::istreambuf_iterator<char>(in), {}), "image/png"};
  }

  /// Body: {"policy": {...}, "aggregation": "corpus" | "per_line"}; a bare
  /// policy object is accepted too.
  Response cer(const std::string& body) const {
    if (auto r = incomplete()) return *r;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception&) {
      return Response::error(400, "bad_request", "request body is not valid JSON");
    }
    if (!j.is_object()) return Response::error(400, "bad_request", "request body must be a JSON object");
    eval::Aggregation agg = eval::Aggregation::kCorpus;
    nlohmann::json policy_json = j;
    if (j.contains("policy")) {
      for (const auto& [k, v] : j.items()) {
        if (k != "policy" && k != "aggregation") return Response::error(400, "bad_request", "unknown field '" + k + "'");
      }
      policy_json = j.at("policy");
      if (j.contains("aggregation")) {
        const auto& a = j.at("aggregation");
        if (a == "per_line") agg = eval::Aggregation::kPerLine;
        else if (a != "corpus") return Response::error(400, "bad_request", "aggregation must be corpus or per_line");
      }
    }
    eval::NormalizationPolicy policy;
    try {
      policy = eval::NormalizationPolicy::from_json(policy_json);
    } catch (const Error& e) {
      return Response::error(400, "bad_policy", e.what());
    }
    const auto s = eval::rescore(store_.records(), policy, agg);
    nlohmann::json per = nlohmann::json::array();
    for (std::size_t i = 0; i < s.records.size(); ++i) {
      const auto& now = s.records[i];
      const auto& base = store_.records()[i];
      nlohmann::json e = {{"id", now.id},
                          {"errors", now.errors()},
                          {"N", now.ref_chars},
                          {"cer", now.cer ? nlohmann::json(*now.cer) : nlohmann::json(nullptr)},
                          {"base_cer", base.cer ? nlohmann::json(*base.cer) : nlohmann::json(nullptr)}};
      e["delta"] = now.cer && base.cer ? nlohmann::json(*now.cer - *base.cer) : nlohmann::json(nullptr);
      e["changed"] = now.errors() != base.errors() || now.ref_chars != base.ref_chars;
      per.push_back(std::move(e));
    }
    return Response::json({{"cer", s.cer},
                           {"base_cer", store_.base_cer()},
                           {"errors", s.errors},
                           {"ref_chars", s.ref_chars},
                           {"aggregation", agg == eval::Aggregation::kCorpus ? "corpus" : "per_line"},
                           {"policy", policy.to_json()},
                           {"records", per}});
  }

  /// Cross-attention of output token `token` painted over the strip.
  Response attention(const std::string& id, const Params& q) const {
    if (auto r = incomplete()) return *r;
    const auto* rec = store_.find(id);
    if (!rec) return Response::error(404, "not_found", "unknown record id '" + id + "'");
    const auto path = store_.artifact(rec->attention);
    if (!path) return Response::error(404, "not_found", "record '" + id + "' has no attention trace");
    const auto it = q.find("token");
    if (it == q.end()) return Response::error(400, "bad_request", "query parameter 'token' is required");
    const auto k = detail::parse_int(it->second);
    AttentionArtifact a;
    try {
      a = load_attention(*path);
    } catch (const Error& e) {
      return Response::error(409, "incomplete_run", e.what());
    }
    if (!k || *k < 0 || *k >= static_cast<long long>(a.cross.size())) {
      return Response::error(400, "bad_request",
                             "token must be an integer in [0, " + std::to_string(a.cross.size()) + ")");
    }
    const auto& h = a.cross[static_cast<std::size_t>(*k)];
    const auto strip = model::heatmap_to_strip(h, a.canvas);
    return Response::json({{"id", id},
                           {"token", *k},
                           {"token_id", a.tokens[static_cast<std::size_t>(*k)]},
                           {"piece", a.pieces[static_cast<std::size_t>(*k)]},
                           {"height", strip.height},
                           {"width", strip.width},
                           {"values", strip.pixels},
                           {"grid", h.grid},
                           {"cls", h.cls},
                           {"argmax_patch", h.argmax_patch()}});
  }

private:
  std::optional<Response> incomplete() const {
    if (store_.complete()) return std::nullopt;
    return Response::error(409, "incomplete_run", store_.problem());
  }

  const RunStore& store_;
};

}  // namespace hatformer::service
