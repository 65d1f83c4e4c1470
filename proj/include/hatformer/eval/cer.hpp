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

#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hatformer/error.hpp"
#include "hatformer/eval/edit_distance.hpp"
#include "hatformer/eval/normalize.hpp"
#include "hatformer/utf8.hpp"

namespace hatformer::eval {

inline constexpr std::string_view kRecordSchema = "hatformer.eval_record/1";

/// Scored line. `reference` and `prediction` are the texts as scored;
/// N counts Unicode scalar values of the reference. `cer` is empty when N=0.
struct EvalRecord {
  std::string id;
  std::string reference;
  std::string prediction;
  int substitutions = 0;
  int deletions = 0;
  int insertions = 0;
  int ref_chars = 0;
  std::optional<double> cer;
  std::vector<AlignOp> alignment;
  /// Optional artifact paths, relative to the run directory.
  std::string image;
  std::string attention;

  int errors() const { return substitutions + deletions + insertions; }
};

/// Scores one line under a normalization policy applied to both sides.
inline EvalRecord score_line(std::string id, std::string_view reference, std::string_view prediction,
                             const NormalizationPolicy& policy = {}) {
  const auto ref = eval::apply(policy, utf8::decode(reference));
  const auto pred = eval::apply(policy, utf8::decode(prediction));
  auto a = align(ref, pred);
  EvalRecord r;
  r.id = std::move(id);
  r.reference = utf8::encode(ref);
  r.prediction = utf8::encode(pred);
  r.substitutions = a.substitutions;
  r.deletions = a.deletions;
  r.insertions = a.insertions;
  r.ref_chars = static_cast<int>(ref.size());
  if (r.ref_chars > 0) r.cer = static_cast<double>(a.errors()) / static_cast<double>(r.ref_chars);
  r.alignment = std::move(a.ops);
  return r;
}

enum class Aggregation { kCorpus, kPerLine };

struct CorpusScore {
  long long errors = 0;
  long long ref_chars = 0;
  double cer = 0.0;
  std::vector<EvalRecord> records;
};

/// Re-scores (reference, prediction) pairs under `policy`.
/// Corpus aggregation is sum(S+D+I) / sum(N); per-line aggregation is the
/// mean of line CERs over lines with a non-empty reference.
inline CorpusScore score_corpus(std::span<const std::pair<std::string, std::string>> pairs,
                                const NormalizationPolicy& policy,
                                Aggregation agg = Aggregation::kCorpus,
                                std::span<const std::string> ids = {}) {
  if (pairs.empty()) throw ValidationError("cannot score an empty record set");
  CorpusScore s;
  s.records.reserve(pairs.size());
  double line_sum = 0.0;
  long long scored_lines = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto id = i < ids.size() ? ids[i] : std::to_string(i);
    auto r = score_line(std::move(id), pairs[i].first, pairs[i].second, policy);
    s.errors += r.errors();
    s.ref_chars += r.ref_chars;
    if (r.cer) {
      line_sum += *r.cer;
      ++scored_lines;
    }
    s.records.push_back(std::move(r));
  }
  if (s.ref_chars == 0) throw ValidationError("all references are empty; CER is undefined");
  s.cer = agg == Aggregation::kCorpus ? static_cast<double>(s.errors) / static_cast<double>(s.ref_chars)
                                      : line_sum / static_cast<double>(scored_lines);
  return s;
}

/// Recomputes the corpus score of stored records from their texts.
inline CorpusScore rescore(std::span<const EvalRecord> records, const NormalizationPolicy& policy,
                           Aggregation agg = Aggregation::kCorpus) {
  std::vector<std::pair<std::string, std::string>> pairs;
  std::vector<std::string> ids;
  pairs.reserve(records.size());
  for (const auto& r : records) {
    pairs.emplace_back(r.reference, r.prediction);
    ids.push_back(r.id);
  }
  auto s = score_corpus(pairs, policy, agg, ids);
  for (std::size_t i = 0; i < records.size(); ++i) {
    s.records[i].image = records[i].image;
    s.records[i].attention = records[i].attention;
  }
  return s;
}

inline nlohmann::json to_json(const EvalRecord& r) {
  nlohmann::json ops = nlohmann::json::array();
  for (const auto& op : r.alignment) {
    ops.push_back({{"op", to_string(op.kind)}, {"ref", op.ref}, {"pred", op.pred}});
  }
  nlohmann::json j = {{"schema", kRecordSchema},
                      {"id", r.id},
                      {"reference", r.reference},
                      {"prediction", r.prediction},
                      {"S", r.substitutions},
                      {"D", r.deletions},
                      {"I", r.insertions},
                      {"N", r.ref_chars},
                      {"cer", r.cer ? nlohmann::json(*r.cer) : nlohmann::json(nullptr)},
                      {"alignment", ops}};
  if (!r.image.empty()) j["image"] = r.image;
  if (!r.attention.empty()) j["attention"] = r.attention;
  return j;
}

inline EvalRecord record_from_json(const nlohmann::json& j) {
  if (j.value("schema", std::string{}) != kRecordSchema) {
    throw ValidationError("unsupported eval record schema '" + j.value("schema", std::string{}) + "'");
  }
  EvalRecord r;
  r.id = j.at("id").get<std::string>();
  r.reference = j.at("reference").get<std::string>();
  r.prediction = j.at("prediction").get<std::string>();
  r.substitutions = j.at("S").get<int>();
  r.deletions = j.at("D").get<int>();
  r.insertions = j.at("I").get<int>();
  r.ref_chars = j.at("N").get<int>();
  if (!j.at("cer").is_null()) r.cer = j.at("cer").get<double>();
  for (const auto& op : j.at("alignment")) {
    r.alignment.push_back({op_from_string(op.at("op").get<std::string>()), op.at("ref").get<int>(),
                           op.at("pred").get<int>()});
  }
  r.image = j.value("image", std::string{});
  r.attention = j.value("attention", std::string{});
  return r;
}

inline void write_jsonl(const std::filesystem::path& path, std::span<const EvalRecord> records) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

inline std::vector<EvalRecord> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<EvalRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace hatformer::eval
