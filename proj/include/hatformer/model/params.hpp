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
 * @file params.hpp
 * @brief Parameter tensors of the encoder-decoder and a visitor over them.
 *
 * Activations are row-major (tokens x features); a linear layer computes
 * Y = X W + b with W of shape (in x out).
 */

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hatformer/model/config.hpp"
#include "hatformer/rng.hpp"

namespace hatformer::model {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

template <class T>
struct LayerNormParams {
  RowVec<T> gamma, beta;
};

template <class T>
struct AttentionParams {
  Mat<T> wq, wk, wv, wo;
  RowVec<T> bq, bk, bv, bo;
};

template <class T>
struct MlpParams {
  Mat<T> w1, w2;
  RowVec<T> b1, b2;
};

template <class T>
struct EncoderLayerParams {
  LayerNormParams<T> ln1;
  AttentionParams<T> attn;
  LayerNormParams<T> ln2;
  MlpParams<T> mlp;
};

template <class T>
struct DecoderLayerParams {
  LayerNormParams<T> ln1;
  AttentionParams<T> self_attn;
  LayerNormParams<T> ln2;
  AttentionParams<T> cross_attn;
  LayerNormParams<T> ln3;
  MlpParams<T> mlp;
};

template <class T>
struct ModelParams {
  ModelConfig config;
  Mat<T> patch_w;   // patch_dim x d
  RowVec<T> patch_b;
  RowVec<T> cls;
  Mat<T> enc_pos;   // (N + 1) x d
  std::vector<EncoderLayerParams<T>> encoder;
  LayerNormParams<T> enc_norm;
  Mat<T> tok_emb;   // vocab x d
  Mat<T> dec_pos;   // max_decode_len x d
  std::vector<DecoderLayerParams<T>> decoder;
  LayerNormParams<T> dec_norm;
  Mat<T> out_w;     // d x vocab
  RowVec<T> out_b;
};

namespace detail {

template <class F, class... Ps>
void visit_ln(F& f, const std::string& p, Ps&... ps) {
  f(p + ".gamma", ps.gamma...);
  f(p + ".beta", ps.beta...);
}

template <class F, class... Ps>
void visit_attn(F& f, const std::string& p, Ps&... ps) {
  f(p + ".wq", ps.wq...);
  f(p + ".bq", ps.bq...);
  f(p + ".wk", ps.wk...);
  f(p + ".bk", ps.bk...);
  f(p + ".wv", ps.wv...);
  f(p + ".bv", ps.bv...);
  f(p + ".wo", ps.wo...);
  f(p + ".bo", ps.bo...);
}

template <class F, class... Ps>
void visit_mlp(F& f, const std::string& p, Ps&... ps) {
  f(p + ".w1", ps.w1...);
  f(p + ".b1", ps.b1...);
  f(p + ".w2", ps.w2...);
  f(p + ".b2", ps.b2...);
}

template <class First, class... Rest>
const First& first_of(const First& f, const Rest&...) {
  return f;
}

}  // namespace detail

/// Calls f(name, tensor_of_p0, tensor_of_p1, ...) for every parameter tensor,
/// in a fixed order. All arguments must share one architecture.
template <class F, class... Ps>
void visit_tensors(F&& f, Ps&... ps) {
  const auto& head = detail::first_of(ps...);
  f("patch.w", ps.patch_w...);
  f("patch.b", ps.patch_b...);
  f("enc.cls", ps.cls...);
  f("enc.pos", ps.enc_pos...);
  for (std::size_t l = 0; l < head.encoder.size(); ++l) {
    const std::string p = "enc." + std::to_string(l);
    detail::visit_ln(f, p + ".ln1", ps.encoder[l].ln1...);
    detail::visit_attn(f, p + ".attn", ps.encoder[l].attn...);
    detail::visit_ln(f, p + ".ln2", ps.encoder[l].ln2...);
    detail::visit_mlp(f, p + ".mlp", ps.encoder[l].mlp...);
  }
  detail::visit_ln(f, "enc.norm", ps.enc_norm...);
  f("dec.tok", ps.tok_emb...);
  f("dec.pos", ps.dec_pos...);
  for (std::size_t l = 0; l < head.decoder.size(); ++l) {
    const std::string p = "dec." + std::to_string(l);
    detail::visit_ln(f, p + ".ln1", ps.decoder[l].ln1...);
    detail::visit_attn(f, p + ".self", ps.decoder[l].self_attn...);
    detail::visit_ln(f, p + ".ln2", ps.decoder[l].ln2...);
    detail::visit_attn(f, p + ".cross", ps.decoder[l].cross_attn...);
    detail::visit_ln(f, p + ".ln3", ps.decoder[l].ln3...);
    detail::visit_mlp(f, p + ".mlp", ps.decoder[l].mlp...);
  }
  detail::visit_ln(f, "dec.norm", ps.dec_norm...);
  f("out.w", ps.out_w...);
  f("out.b", ps.out_b...);
}

namespace detail {

template <class T>
void resize_ln(LayerNormParams<T>& p, int d) {
  p.gamma = RowVec<T>::Ones(d);
  p.beta = RowVec<T>::Zero(d);
}

template <class T>
void resize_attn(AttentionParams<T>& p, int d) {
  for (auto* w : {&p.wq, &p.wk, &p.wv, &p.wo}) *w = Mat<T>::Zero(d, d);
  for (auto* b : {&p.bq, &p.bk, &p.bv, &p.bo}) *b = RowVec<T>::Zero(d);
}

template <class T>
void resize_mlp(MlpParams<T>& p, int d, int f) {
  p.w1 = Mat<T>::Zero(d, f);
  p.b1 = RowVec<T>::Zero(f);
  p.w2 = Mat<T>::Zero(f, d);
  p.b2 = RowVec<T>::Zero(d);
}

}  // namespace detail

/// Correctly shaped parameters: weights zero, layer-norm gains one.
template <class T>
ModelParams<T> zero_params(const ModelConfig& c) {
  c.validate();
  ModelParams<T> p;
  p.config = c;
  const int d = c.d_model;
  p.patch_w = Mat<T>::Zero(c.patch_dim(), d);
  p.patch_b = RowVec<T>::Zero(d);
  p.cls = RowVec<T>::Zero(d);
  p.enc_pos = Mat<T>::Zero(c.n_tokens(), d);
  p.encoder.resize(static_cast<std::size_t>(c.n_enc_layers));
  for (auto& l : p.encoder) {
    detail::resize_ln(l.ln1, d);
    detail::resize_attn(l.attn, d);
    detail::resize_ln(l.ln2, d);
    detail::resize_mlp(l.mlp, d, c.ff_dim());
  }
  detail::resize_ln(p.enc_norm, d);
  p.tok_emb = Mat<T>::Zero(c.vocab_size, d);
  p.dec_pos = Mat<T>::Zero(c.max_decode_len, d);
  p.decoder.resize(static_cast<std::size_t>(c.n_dec_layers));
  for (auto& l : p.decoder) {
    detail::resize_ln(l.ln1, d);
    detail::resize_attn(l.self_attn, d);
    detail::resize_ln(l.ln2, d);
    detail::resize_attn(l.cross_attn, d);
    detail::resize_ln(l.ln3, d);
    detail::resize_mlp(l.mlp, d, c.ff_dim());
  }
  detail::resize_ln(p.dec_norm, d);
  p.out_w = Mat<T>::Zero(d, c.vocab_size);
  p.out_b = RowVec<T>::Zero(c.vocab_size);
  return p;
}

/// Same shapes as `like`, all zeros (gradient and optimizer buffers).
template <class T>
ModelParams<T> zeros_like(const ModelParams<T>& like) {
  ModelParams<T> z = like;
  visit_tensors([](const std::string&, auto& t) { t.setZero(); }, z);
  return z;
}

/// Gaussian init (std 0.02) for weights and embeddings; biases zero,
/// layer-norm gain one. Each tensor draws from its own counter stream.
template <class T>
ModelParams<T> init_params(const ModelConfig& c, std::uint64_t seed) {
  auto p = zero_params<T>(c);
  std::uint64_t stream = 0;
  visit_tensors(
      [&](const std::string& name, auto& t) {
        ++stream;
        const bool is_weight = name.ends_with(".w") || name.ends_with(".wq") || name.ends_with(".wk") ||
                               name.ends_with(".wv") || name.ends_with(".wo") || name.ends_with(".w1") ||
                               name.ends_with(".w2") || name.ends_with(".pos") || name.ends_with(".tok") ||
                               name.ends_with(".cls");
        if (!is_weight) return;
        CounterRng rng(seed, 0, 600 + stream);
        for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = static_cast<T>(0.02 * rng.normal());
      },
      p);
  return p;
}

template <class To, class From>
ModelParams<To> cast_params(const ModelParams<From>& p) {
  auto out = zero_params<To>(p.config);
  visit_tensors([](const std::string&, auto& dst, const auto& src) { dst = src.template cast<To>(); }, out, p);
  return out;
}

template <class T>
std::size_t parameter_count(const ModelParams<T>& p) {
  std::size_t n = 0;
  visit_tensors([&](const std::string&, const auto& t) { n += static_cast<std::size_t>(t.size()); }, p);
  return n;
}

template <class T>
bool all_finite(const ModelParams<T>& p) {
  bool ok = true;
  visit_tensors([&](const std::string&, const auto& t) { ok = ok && t.allFinite(); }, p);
  return ok;
}

}  // namespace hatformer::model
