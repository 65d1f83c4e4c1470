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
 * @file transformer.hpp
 * @brief Pre-norm encoder-decoder: forward, teacher-forced loss, backward
 *        and incremental (KV-cached) decoding.
 *
 * Encoder input: the 384x384 canvas cut into P x P patches in row-major patch
 * order, linearly projected, preceded by a class token, plus learned
 * positions. Decoder input: [<s>, y1, ..., yn]; targets: [y1, ..., yn, </s>].
 */

#pragma once

#include <memory>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "hatformer/imaging/line_image.hpp"
#include "hatformer/model/layers.hpp"
#include "hatformer/tokenizer/bbpe.hpp"

namespace hatformer::model {

using bbpe::TokenId;

/// Per-layer, per-head attention matrices captured during a forward pass.
template <class T>
struct AttentionTrace {
  std::vector<std::vector<Mat<T>>> encoder_self;   // layer -> head -> (N+1) x (N+1)
  std::vector<std::vector<Mat<T>>> decoder_cross;  // layer -> head -> T x (N+1)
};

// ---------------------------------------------------------------- encoder

/// Patch matrix (N x P*P) of a canvas; patch p = (p / grid, p % grid).
template <class T>
Mat<T> patchify(const BlockCanvas& canvas, const ModelConfig& c) {
  canvas.validate();
  if (c.image_size != BlockCanvas::kSize) {
    throw ValidationError("canvas is " + std::to_string(BlockCanvas::kSize) + " px but the model expects " +
                          std::to_string(c.image_size));
  }
  const int ps = c.patch_size, g = c.grid();
  Mat<T> out(c.n_patches(), c.patch_dim());
  for (int pr = 0; pr < g; ++pr) {
    for (int pc = 0; pc < g; ++pc) {
      auto row = out.row(pr * g + pc);
      for (int i = 0; i < ps; ++i) {
        for (int j = 0; j < ps; ++j) row(i * ps + j) = static_cast<T>(canvas.at(pr * ps + i, pc * ps + j));
      }
    }
  }
  return out;
}

/// N+1 token embeddings: class token first, positions added.
template <class T>
Mat<T> patch_embed(const Mat<T>& patches, const ModelParams<T>& p) {
  const auto& c = p.config;
  if (patches.rows() != c.n_patches() || patches.cols() != c.patch_dim()) {
    throw ValidationError("patch matrix must be " + std::to_string(c.n_patches()) + " x " +
                          std::to_string(c.patch_dim()));
  }
  Mat<T> x(c.n_tokens(), c.d_model);
  x.row(0) = p.cls;
  x.bottomRows(c.n_patches()) = linear(patches, p.patch_w, p.patch_b);
  x += p.enc_pos;
  return x;
}

template <class T>
struct EncoderLayerCache {
  LayerNormCache<T> ln1, ln2;
  AttentionCache<T> attn;
  MlpCache<T> mlp;
};

template <class T>
struct EncoderCache {
  Mat<T> patches;
  std::vector<EncoderLayerCache<T>> layers;
  LayerNormCache<T> norm;
};

namespace detail {

inline void check_finite(bool ok, const std::string& where) {
  if (!ok) throw NumericError("non-finite activation in " + where);
}

}  // namespace detail

/// Encoder memory (N+1 x d) from token embeddings.
template <class T>
Mat<T> encode(const Mat<T>& embeddings, const ModelParams<T>& p, std::type_identity_t<EncoderCache<T>>* cache = nullptr,
              std::type_identity_t<AttentionTrace<T>>* trace = nullptr) {
  const auto& c = p.config;
  if (embeddings.rows() != c.n_tokens() || embeddings.cols() != c.d_model) {
    throw ValidationError("encoder input must be " + std::to_string(c.n_tokens()) + " x " + std::to_string(c.d_model));
  }
  if (cache) cache->layers.resize(p.encoder.size());
  if (trace) trace->encoder_self.assign(p.encoder.size(), {});
  Mat<T> x = embeddings;
  for (std::size_t l = 0; l < p.encoder.size(); ++l) {
    const auto& lp = p.encoder[l];
    auto* lc = cache ? &cache->layers[l] : nullptr;
    const Mat<T> h1 = layer_norm(x, lp.ln1, lc ? &lc->ln1 : nullptr);
    x += attention(h1, h1, lp.attn, c.n_heads, false, lc ? &lc->attn : nullptr,
                   trace ? &trace->encoder_self[l] : nullptr);
    const Mat<T> h2 = layer_norm(x, lp.ln2, lc ? &lc->ln2 : nullptr);
    x += mlp(h2, lp.mlp, lc ? &lc->mlp : nullptr);
    detail::check_finite(x.allFinite(), "encoder layer " + std::to_string(l));
  }
  return layer_norm(x, p.enc_norm, cache ? &cache->norm : nullptr);
}

template <class T>
Mat<T> encode_canvas(const BlockCanvas& canvas, const ModelParams<T>& p, std::type_identity_t<EncoderCache<T>>* cache = nullptr,
                     std::type_identity_t<AttentionTrace<T>>* trace = nullptr) {
  Mat<T> patches = patchify<T>(canvas, p.config);
  const Mat<T> emb = patch_embed(patches, p);
  if (cache) cache->patches = std::move(patches);
  return encode(emb, p, cache, trace);
}

/// Gradient of the encoder output flows back to every encoder parameter.
template <class T>
void encoder_backward(const Mat<T>& dmemory, const EncoderCache<T>& cache, const ModelParams<T>& p,
                      ModelParams<T>& g) {
  const int heads = p.config.n_heads;
  Mat<T> dx = layer_norm_backward(dmemory, cache.norm, p.enc_norm, g.enc_norm);
  for (std::size_t l = p.encoder.size(); l-- > 0;) {
    const auto& lp = p.encoder[l];
    auto& lg = g.encoder[l];
    const auto& lc = cache.layers[l];
    dx += layer_norm_backward(mlp_backward(dx, lc.mlp, lp.mlp, lg.mlp), lc.ln2, lp.ln2, lg.ln2);
    auto [dq, dkv] = attention_backward(dx, lc.attn, lp.attn, lg.attn, heads);
    dq += dkv;
    dx += layer_norm_backward(dq, lc.ln1, lp.ln1, lg.ln1);
  }
  g.enc_pos += dx;
  g.cls += dx.row(0);
  const Mat<T> dpatch = dx.bottomRows(p.config.n_patches());
  g.patch_w.noalias() += cache.patches.transpose() * dpatch;
  g.patch_b += dpatch.colwise().sum();
}

// ---------------------------------------------------------------- decoder

template <class T>
struct DecoderLayerCache {
  LayerNormCache<T> ln1, ln2, ln3;
  AttentionCache<T> self_attn, cross_attn;
  MlpCache<T> mlp;
};

template <class T>
struct DecoderCache {
  std::vector<TokenId> inputs;
  std::vector<DecoderLayerCache<T>> layers;
  LayerNormCache<T> norm;
  Mat<T> hidden;  // final normalized states
};

template <class T>
void check_decoder_inputs(std::span<const TokenId> inputs, const ModelConfig& c) {
  if (inputs.empty()) throw ValidationError("decoder input is empty");
  if (static_cast<int>(inputs.size()) > c.max_decode_len) {
    throw LengthError("decoder input of " + std::to_string(inputs.size()) + " tokens exceeds max_decode_len " +
                      std::to_string(c.max_decode_len));
  }
  for (TokenId t : inputs) {
    if (t < 0 || t >= c.vocab_size) throw ValidationError("token id " + std::to_string(t) + " outside the vocabulary");
  }
}

/// Teacher-forced logits (T x vocab) for every decoder input position.
template <class T>
Mat<T> decode_logits(const Mat<T>& memory, std::span<const TokenId> inputs, const ModelParams<T>& p,
                     std::type_identity_t<DecoderCache<T>>* cache = nullptr, std::type_identity_t<AttentionTrace<T>>* trace = nullptr) {
  const auto& c = p.config;
  check_decoder_inputs<T>(inputs, c);
  const auto n = static_cast<Eigen::Index>(inputs.size());
  Mat<T> x(n, c.d_model);
  for (Eigen::Index i = 0; i < n; ++i) x.row(i) = p.tok_emb.row(inputs[static_cast<std::size_t>(i)]) + p.dec_pos.row(i);
  if (cache) {
    cache->inputs.assign(inputs.begin(), inputs.end());
    cache->layers.resize(p.decoder.size());
  }
  if (trace) trace->decoder_cross.assign(p.decoder.size(), {});
  for (std::size_t l = 0; l < p.decoder.size(); ++l) {
    const auto& lp = p.decoder[l];
    auto* lc = cache ? &cache->layers[l] : nullptr;
    const Mat<T> h1 = layer_norm(x, lp.ln1, lc ? &lc->ln1 : nullptr);
    x += attention(h1, h1, lp.self_attn, c.n_heads, true, lc ? &lc->self_attn : nullptr);
    const Mat<T> h2 = layer_norm(x, lp.ln2, lc ? &lc->ln2 : nullptr);
    x += attention(h2, memory, lp.cross_attn, c.n_heads, false, lc ? &lc->cross_attn : nullptr,
                   trace ? &trace->decoder_cross[l] : nullptr);
    const Mat<T> h3 = layer_norm(x, lp.ln3, lc ? &lc->ln3 : nullptr);
    x += mlp(h3, lp.mlp, lc ? &lc->mlp : nullptr);
    detail::check_finite(x.allFinite(), "decoder layer " + std::to_string(l));
  }
  Mat<T> h = layer_norm(x, p.dec_norm, cache ? &cache->norm : nullptr);
  Mat<T> logits = linear(h, p.out_w, p.out_b);
  if (cache) cache->hidden = std::move(h);
  return logits;
}

/// Returns the gradient with respect to the encoder memory.
template <class T>
Mat<T> decoder_backward(const Mat<T>& dlogits, const DecoderCache<T>& cache, const ModelParams<T>& p,
                        ModelParams<T>& g) {
  const int heads = p.config.n_heads;
  Mat<T> dh = linear_backward(dlogits, cache.hidden, p.out_w, g.out_w, g.out_b);
  Mat<T> dx = layer_norm_backward(dh, cache.norm, p.dec_norm, g.dec_norm);
  Mat<T> dmemory;
  for (std::size_t l = p.decoder.size(); l-- > 0;) {
    const auto& lp = p.decoder[l];
    auto& lg = g.decoder[l];
    const auto& lc = cache.layers[l];
    dx += layer_norm_backward(mlp_backward(dx, lc.mlp, lp.mlp, lg.mlp), lc.ln3, lp.ln3, lg.ln3);
    auto [dq, dmem] = attention_backward(dx, lc.cross_attn, lp.cross_attn, lg.cross_attn, heads);
    if (dmemory.size() == 0) {
      dmemory = std::move(dmem);
    } else {
      dmemory += dmem;
    }
    dx += layer_norm_backward(dq, lc.ln2, lp.ln2, lg.ln2);
    auto [dsq, dskv] = attention_backward(dx, lc.self_attn, lp.self_attn, lg.self_attn, heads);
    dsq += dskv;
    dx += layer_norm_backward(dsq, lc.ln1, lp.ln1, lg.ln1);
  }
  for (Eigen::Index i = 0; i < dx.rows(); ++i) {
    g.tok_emb.row(cache.inputs[static_cast<std::size_t>(i)]) += dx.row(i);
    g.dec_pos.row(i) += dx.row(i);
  }
  return dmemory;
}

// ---------------------------------------------------------------- loss

/// Decoder inputs and targets for a label: [<s>] + y and y + [</s>].
inline std::pair<std::vector<TokenId>, std::vector<TokenId>> teacher_forcing_pair(std::span<const TokenId> label) {
  std::vector<TokenId> in{bbpe::kBos}, out(label.begin(), label.end());
  in.insert(in.end(), label.begin(), label.end());
  out.push_back(bbpe::kEos);
  return {std::move(in), std::move(out)};
}

struct LossSum {
  double loss = 0.0;      // summed negative log-likelihood
  long long tokens = 0;   // target positions that count (non-padding)
};

/// Summed cross-entropy over targets other than <pad>, plus d(loss * scale)/dlogits.
template <class T>
LossSum cross_entropy(const Mat<T>& logits, std::span<const TokenId> targets, T scale, Mat<T>* dlogits) {
  if (static_cast<std::size_t>(logits.rows()) != targets.size()) throw ValidationError("targets do not match logits");
  LossSum s;
  if (dlogits) *dlogits = Mat<T>::Zero(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const TokenId t = targets[static_cast<std::size_t>(i)];
    if (t == bbpe::kPad) continue;
    const T mx = logits.row(i).maxCoeff();
    double z = 0.0;
    for (Eigen::Index v = 0; v < logits.cols(); ++v) z += std::exp(static_cast<double>(logits(i, v) - mx));
    const double lse = static_cast<double>(mx) + std::log(z);
    s.loss += lse - static_cast<double>(logits(i, t));
    ++s.tokens;
    if (dlogits) {
      for (Eigen::Index v = 0; v < logits.cols(); ++v) {
        (*dlogits)(i, v) = static_cast<T>(std::exp(static_cast<double>(logits(i, v)) - lse)) * scale;
      }
      (*dlogits)(i, t) -= scale;
    }
  }
  return s;
}

/// A training example: a packed canvas and its label tokens (no specials).
struct Example {
  BlockCanvas canvas;
  std::vector<TokenId> label;
};

struct BatchLoss {
  double mean_loss = 0.0;  // per counted token
  long long tokens = 0;
};

/// Mean token cross-entropy over a batch; when `grads` is given, adds the
/// gradient of that mean to it.
template <class T>
BatchLoss batch_loss(const ModelParams<T>& p, std::span<const Example> batch, std::type_identity_t<ModelParams<T>>* grads = nullptr) {
  long long total = 0;
  for (const auto& ex : batch) {
    for (TokenId t : ex.label) total += t != bbpe::kPad;
    ++total;  // end-of-sequence target
  }
  BatchLoss out;
  out.tokens = total;
  if (total == 0) return out;
  const T scale = T(1) / static_cast<T>(total);
  double sum = 0.0;
  for (const auto& ex : batch) {
    const auto [in, target] = teacher_forcing_pair(ex.label);
    if (!grads) {
      const Mat<T> memory = encode_canvas(ex.canvas, p);
      sum += cross_entropy(decode_logits(memory, in, p), target, scale, static_cast<Mat<T>*>(nullptr)).loss;
      continue;
    }
    EncoderCache<T> ec;
    DecoderCache<T> dc;
    const Mat<T> memory = encode_canvas(ex.canvas, p, &ec);
    Mat<T> dlogits;
    sum += cross_entropy(decode_logits(memory, in, p, &dc), target, scale, &dlogits).loss;
    const Mat<T> dmemory = decoder_backward(dlogits, dc, p, *grads);
    encoder_backward(dmemory, ec, p, *grads);
  }
  out.mean_loss = sum / static_cast<double>(total);
  if (!std::isfinite(out.mean_loss)) throw NumericError("non-finite loss");
  if (grads && !all_finite(*grads)) throw NumericError("non-finite gradient");
  return out;
}

// ---------------------------------------------------------------- incremental decoding

/// Key/value projections of the encoder memory for every decoder layer,
/// computed once per image and shared by all hypotheses.
template <class T>
struct CrossMemory {
  std::vector<Mat<T>> k, v;
};

template <class T>
std::shared_ptr<const CrossMemory<T>> precompute_cross(const Mat<T>& memory, const ModelParams<T>& p) {
  auto m = std::make_shared<CrossMemory<T>>();
  for (const auto& lp : p.decoder) {
    m->k.push_back(linear(memory, lp.cross_attn.wk, lp.cross_attn.bk));
    m->v.push_back(linear(memory, lp.cross_attn.wv, lp.cross_attn.bv));
  }
  return m;
}

/// Decoder state after consuming a prefix: cached self-attention keys and
/// values per layer plus the logits for the next token.
template <class T>
struct DecoderState {
  int length = 0;
  std::vector<Mat<T>> k, v;  // layer -> max_decode_len x d (first `length` rows valid)
  RowVec<T> logits;
};

namespace detail {

template <class T>
RowVec<T> attend_one(const RowVec<T>& q, const Mat<T>& k, const Mat<T>& v, Eigen::Index n, int heads,
                     std::vector<RowVec<T>>* probs) {
  const auto d = q.cols();
  const auto dh = d / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  RowVec<T> o(d);
  for (int h = 0; h < heads; ++h) {
    Mat<T> s = (q.middleCols(h * dh, dh) * k.topRows(n).middleCols(h * dh, dh).transpose()) * scale;
    softmax_rows(s, [n](Eigen::Index) { return n; });
    o.middleCols(h * dh, dh).noalias() = s * v.topRows(n).middleCols(h * dh, dh);
    if (probs) probs->push_back(s.row(0));
  }
  return o;
}

}  // namespace detail

template <class T>
DecoderState<T> initial_state(const ModelParams<T>& p) {
  DecoderState<T> s;
  for (std::size_t l = 0; l < p.decoder.size(); ++l) {
    s.k.push_back(Mat<T>::Zero(p.config.max_decode_len, p.config.d_model));
    s.v.push_back(Mat<T>::Zero(p.config.max_decode_len, p.config.d_model));
  }
  return s;
}

/// Feeds one token and updates the state's logits. `cross_probs`, when given,
/// receives layer -> head cross-attention rows for this position.
template <class T>
void decode_step(DecoderState<T>& s, TokenId token, const CrossMemory<T>& cross, const ModelParams<T>& p,
                 std::vector<std::vector<RowVec<T>>>* cross_probs = nullptr) {
  const auto& c = p.config;
  if (s.length >= c.max_decode_len) {
    throw LengthError("prefix reached max_decode_len " + std::to_string(c.max_decode_len));
  }
  if (token < 0 || token >= c.vocab_size) throw ValidationError("token id " + std::to_string(token) + " outside the vocabulary");
  const int t = s.length;
  Mat<T> x = p.tok_emb.row(token) + p.dec_pos.row(t);
  if (cross_probs) cross_probs->assign(p.decoder.size(), {});
  for (std::size_t l = 0; l < p.decoder.size(); ++l) {
    const auto& lp = p.decoder[l];
    const Mat<T> h1 = layer_norm(x, lp.ln1);
    const Mat<T> q = linear(h1, lp.self_attn.wq, lp.self_attn.bq);
    s.k[l].row(t) = linear(h1, lp.self_attn.wk, lp.self_attn.bk);
    s.v[l].row(t) = linear(h1, lp.self_attn.wv, lp.self_attn.bv);
    const Mat<T> so = detail::attend_one<T>(q, s.k[l], s.v[l], t + 1, c.n_heads, nullptr);
    x += linear(so, lp.self_attn.wo, lp.self_attn.bo);
    const Mat<T> h2 = layer_norm(x, lp.ln2);
    const Mat<T> q2 = linear(h2, lp.cross_attn.wq, lp.cross_attn.bq);
    const Mat<T> co = detail::attend_one<T>(q2, cross.k[l], cross.v[l], cross.k[l].rows(), c.n_heads,
                                            cross_probs ? &(*cross_probs)[l] : nullptr);
    x += linear(co, lp.cross_attn.wo, lp.cross_attn.bo);
    const Mat<T> h3 = layer_norm(x, lp.ln3);
    x += mlp(h3, lp.mlp);
  }
  detail::check_finite(x.allFinite(), "incremental decoder step " + std::to_string(t));
  s.logits = linear(layer_norm(x, p.dec_norm), p.out_w, p.out_b);
  s.length = t + 1;
}

/// log-softmax of one logit row, in double.
template <class T>
std::vector<double> log_softmax(const RowVec<T>& logits) {
  const double mx = static_cast<double>(logits.maxCoeff());
  double z = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) z += std::exp(static_cast<double>(logits(i)) - mx);
  const double lse = mx + std::log(z);
  std::vector<double> out(static_cast<std::size_t>(logits.size()));
  for (Eigen::Index i = 0; i < logits.size(); ++i) out[static_cast<std::size_t>(i)] = static_cast<double>(logits(i)) - lse;
  return out;
}

/// Next-token distribution after `prefix` (which starts with <s>).
template <class T>
std::vector<double> next_token_distribution(const Mat<T>& memory, std::span<const TokenId> prefix,
                                            const ModelParams<T>& p) {
  if (prefix.empty()) throw ValidationError("prefix must contain at least the start token");
  if (static_cast<int>(prefix.size()) > p.config.max_decode_len) {
    throw LengthError("prefix of " + std::to_string(prefix.size()) + " tokens exceeds max_decode_len");
  }
  const auto cross = precompute_cross(memory, p);
  auto s = initial_state(p);
  for (TokenId t : prefix) decode_step(s, t, *cross, p);
  auto lp = log_softmax(s.logits);
  for (auto& v : lp) v = std::exp(v);
  return lp;
}

}  // namespace hatformer::model
