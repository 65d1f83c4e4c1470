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
 * @file checkpoint.hpp
 * @brief Binary checkpoint container.
 *
 *   bytes 0..3   magic "HATF"
 *   bytes 4..7   format version, little-endian u32 (currently 1)
 *   bytes 8..11  header length H, little-endian u32
 *   H bytes      JSON header: {"schema", "config", "tensors": [{name, rows, cols}], "meta"}
 *   rest         float32 little-endian tensor data, in header order, row-major
 */

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hatformer/model/params.hpp"

namespace hatformer::model {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[4] = {'H', 'A', 'T', 'F'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint32_t get_u32(const std::string& in, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[off + i])) << (8 * i);
  return v;
}

}  // namespace detail

template <class T>
std::string serialize_checkpoint(const ModelParams<T>& p, const nlohmann::json& meta = nlohmann::json::object()) {
  nlohmann::json tensors = nlohmann::json::array();
  std::string data;
  visit_tensors(
      [&](const std::string& name, const auto& t) {
        tensors.push_back({{"name", name}, {"rows", t.rows()}, {"cols", t.cols()}});
        for (Eigen::Index i = 0; i < t.size(); ++i) {
          const auto f = static_cast<float>(t.data()[i]);
          char buf[4];
          std::memcpy(buf, &f, 4);
          data.append(buf, 4);
        }
      },
      p);
  const nlohmann::json header = {
      {"schema", "hatformer.checkpoint/1"}, {"config", to_json(p.config)}, {"tensors", tensors}, {"meta", meta}};
  const std::string h = header.dump();
  std::string out(kCheckpointMagic, 4);
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(h.size()));
  return out + h + data;
}

struct CheckpointInfo {
  ModelConfig config;
  nlohmann::json meta;
};

template <class T>
ModelParams<T> deserialize_checkpoint(const std::string& bytes, CheckpointInfo* info = nullptr) {
  if (bytes.size() < 12 || bytes.compare(0, 4, kCheckpointMagic, 4) != 0) {
    throw ValidationError("not a hatformer checkpoint");
  }
  const auto version = detail::get_u32(bytes, 4);
  if (version != kCheckpointVersion) throw ValidationError("unsupported checkpoint version " + std::to_string(version));
  const auto hlen = detail::get_u32(bytes, 8);
  if (12 + static_cast<std::size_t>(hlen) > bytes.size()) throw ValidationError("truncated checkpoint header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(12, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint header: ") + e.what());
  }
  if (header.value("schema", "") != "hatformer.checkpoint/1") throw ValidationError("unknown checkpoint schema");
  const auto config = model_config_from_json(header.at("config"));
  auto p = zero_params<T>(config);
  const auto& tensors = header.at("tensors");
  std::size_t k = 0, off = 12 + hlen;
  visit_tensors(
      [&](const std::string& name, auto& t) {
        if (k >= tensors.size()) throw ValidationError("checkpoint is missing tensor " + name);
        const auto& e = tensors[k++];
        if (e.at("name") != name || e.at("rows").get<Eigen::Index>() != t.rows() ||
            e.at("cols").get<Eigen::Index>() != t.cols()) {
          throw ValidationError("checkpoint tensor " + e.at("name").get<std::string>() + " does not match " + name);
        }
        const auto n = static_cast<std::size_t>(t.size());
        if (off + 4 * n > bytes.size()) throw ValidationError("truncated checkpoint data at " + name);
        for (std::size_t i = 0; i < n; ++i) {
          float f;
          std::memcpy(&f, bytes.data() + off + 4 * i, 4);
          t.data()[i] = static_cast<T>(f);
        }
        off += 4 * n;
      },
      p);
  if (k != tensors.size() || off != bytes.size()) throw ValidationError("checkpoint has trailing data");
  if (!all_finite(p)) throw NumericError("checkpoint contains non-finite values");
  if (info) *info = {config, header.value("meta", nlohmann::json::object())};
  return p;
}

template <class T>
void save_checkpoint(const ModelParams<T>& p, const std::filesystem::path& path,
                     const nlohmann::json& meta = nlohmann::json::object()) {
  // Written to a sibling temporary file, then renamed into place.
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    const auto bytes = serialize_checkpoint(p, meta);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("cannot write checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

template <class T>
ModelParams<T> load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint<T>(ss.str(), info);
}

}  // namespace hatformer::model
