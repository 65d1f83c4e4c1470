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
 * @file dataset.hpp
 * @brief Synthetic dataset generation and the JSONL manifest.
 *
 * Layout of an output directory:
 *
 *   manifest.jsonl      one line per written item, ascending index
 *   errors.jsonl        one line per skipped item
 *   images/NNNNNNN.png  line image
 *   images/NNNNNNN.txt  its ground truth, no trailing newline
 *
 * Split sizes for `count` items: val = floor(0.09 count), test =
 * floor(0.01 count), train = the rest. Which index lands in which split is a
 * seeded permutation of [0, count).
 */

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "hatformer/error.hpp"
#include "hatformer/imaging/png_io.hpp"
#include "hatformer/synth/render.hpp"

namespace hatformer::synth {

enum class Split { kTrain, kVal, kTest };

inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

inline Split split_from_string(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw ValidationError("unknown split '" + std::string(s) + "'");
}

struct SplitSizes {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};

inline SplitSizes split_sizes(std::size_t count) {
  SplitSizes s;
  s.val = count * 9 / 100;
  s.test = count / 100;
  s.train = count - s.val - s.test;
  return s;
}

inline std::vector<Split> assign_splits(std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  CounterRng rng(seed, 0, 401);
  rng.shuffle(order);
  const auto sizes = split_sizes(count);
  std::vector<Split> out(count, Split::kTrain);
  for (std::size_t k = 0; k < count; ++k) {
    if (k >= sizes.train + sizes.val) {
      out[order[k]] = Split::kTest;
    } else if (k >= sizes.train) {
      out[order[k]] = Split::kVal;
    }
  }
  return out;
}

struct ManifestEntry {
  std::string image;  // relative to the manifest's directory
  std::string text;
  Split split = Split::kTrain;
  SynthSpec spec;
};

inline nlohmann::json to_json(const ManifestEntry& e) {
  return {{"image", e.image}, {"text", e.text}, {"split", to_string(e.split)}, {"spec", to_json(e.spec)}};
}

inline ManifestEntry entry_from_json(const nlohmann::json& j) {
  ManifestEntry e;
  e.image = j.at("image").get<std::string>();
  e.text = j.at("text").get<std::string>();
  e.split = split_from_string(j.at("split").get<std::string>());
  if (j.contains("spec")) e.spec = spec_from_json(j.at("spec"));
  return e;
}

/// Reads a manifest; a truncated final line (from an interrupted run) is ignored.
inline std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read manifest " + path.string());
  std::vector<ManifestEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(entry_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error&) {
      if (in.peek() == std::char_traits<char>::eof()) break;
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": malformed manifest line");
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

struct GenerateOptions {
  SynthConfig synth;
  unsigned threads = 1;
  /// Called with a one-line message per skipped item.
  std::function<void(const std::string&)> log;
};

struct GenerateReport {
  std::size_t written = 0;
  std::size_t skipped = 0;
  std::size_t resumed = 0;
  SplitSizes sizes;
};

inline std::string item_stem(std::uint64_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%07llu", static_cast<unsigned long long>(index));
  return buf;
}

/// Generates items [0, count). Items already present in manifest.jsonl or
/// errors.jsonl are kept and not regenerated.
inline GenerateReport generate_dataset(std::uint64_t seed, std::size_t count, const AssetPools& pools,
                                       const std::filesystem::path& out, const GenerateOptions& opts = {}) {
  if (count < 1) throw ConfigError("count must be at least 1");
  pools.validate();
  opts.synth.validate();
  std::filesystem::create_directories(out / "images");
  const auto manifest_path = out / "manifest.jsonl";
  const auto errors_path = out / "errors.jsonl";

  // Resume: keep the longest valid prefix of both logs.
  std::vector<ManifestEntry> kept;
  std::set<std::uint64_t> done;
  if (std::filesystem::exists(manifest_path)) {
    for (auto& e : read_manifest(manifest_path)) {
      if (e.spec.index >= count || !std::filesystem::exists(out / e.image)) break;
      done.insert(e.spec.index);
      kept.push_back(std::move(e));
    }
  }
  std::vector<nlohmann::json> kept_errors;
  if (std::filesystem::exists(errors_path)) {
    std::ifstream in(errors_path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        auto j = nlohmann::json::parse(line);
        const auto idx = j.at("index").get<std::uint64_t>();
        if (idx >= count) break;
        done.insert(idx);
        kept_errors.push_back(std::move(j));
      } catch (const nlohmann::json::exception&) {
        break;
      }
    }
  }

  GenerateReport report;
  report.resumed = done.size();
  report.written = kept.size();
  report.skipped = kept_errors.size();
  report.sizes = split_sizes(count);

  // Rewrite the surviving prefix so a torn final line is dropped.
  std::ofstream manifest(manifest_path, std::ios::trunc);
  std::ofstream errors(errors_path, std::ios::trunc);
  if (!manifest || !errors) throw IoError("cannot write manifest in " + out.string());
  for (const auto& e : kept) manifest << to_json(e).dump() << '\n';
  for (const auto& j : kept_errors) errors << j.dump() << '\n';

  const auto splits = assign_splits(count, seed);
  std::vector<std::uint64_t> todo;
  for (std::uint64_t i = 0; i < count; ++i) {
    if (!done.contains(i)) todo.push_back(i);
  }

  struct Result {
    std::optional<ManifestEntry> entry;
    nlohmann::json error;
  };
  auto make = [&](std::uint64_t index) -> Result {
    const auto spec = sample_spec(seed, index, pools, opts.synth);
    try {
      auto line = render(spec, pools, opts.synth);
      const auto stem = item_stem(index);
      save_png(line.image, out / "images" / (stem + ".png"));
      std::ofstream label(out / "images" / (stem + ".txt"), std::ios::binary);
      label << line.text;
      if (!label) throw IoError("cannot write label for item " + stem);
      return {ManifestEntry{"images/" + stem + ".png", line.text, splits[index], spec}, {}};
    } catch (const Error& e) {
      return {std::nullopt, {{"index", index}, {"error", e.kind()}, {"message", e.what()}}};
    }
  };

  const unsigned threads = std::max(1u, opts.threads);
  const std::size_t batch = 32 * threads;
  for (std::size_t start = 0; start < todo.size(); start += batch) {
    const std::size_t end = std::min(todo.size(), start + batch);
    std::vector<Result> results(end - start);
    if (threads == 1) {
      for (std::size_t k = start; k < end; ++k) results[k - start] = make(todo[k]);
    } else {
      std::vector<std::thread> pool;
      for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
          for (std::size_t k = start + t; k < end; k += threads) results[k - start] = make(todo[k]);
        });
      }
      for (auto& th : pool) th.join();
    }
    for (auto& r : results) {
      if (r.entry) {
        manifest << to_json(*r.entry).dump() << '\n';
        ++report.written;
      } else {
        errors << r.error.dump() << '\n';
        ++report.skipped;
        if (opts.log) opts.log(r.error.dump());
      }
    }
    manifest.flush();
    errors.flush();
  }
  return report;
}

}  // namespace hatformer::synth
