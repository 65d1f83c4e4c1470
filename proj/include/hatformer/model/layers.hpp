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

// Building blocks with hand-written backward passes. Each forward takes an
// optional cache; backward consumes it, accumulates parameter gradients and
// returns the gradient with respect to the input.

#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "hatformer/model/params.hpp"

namespace hatformer::model {

inline constexpr double kLayerNormEps = 1e-5;

// ---------------------------------------------------------------- linear

template <class T>
Mat<T> linear(const Mat<T>& x, const Mat<T>& w, const RowVec<T>& b) {
  Mat<T> y = x * w;
  y.rowwise() += b;
  return y;
}

template <class T>
Mat<T> linear_backward(const Mat<T>& dy, const Mat<T>& x, const Mat<T>& w, Mat<T>& dw, RowVec<T>& db) {
  dw.noalias() += x.transpose() * dy;
  db += dy.colwise().sum();
  return dy * w.transpose();
}

// ---------------------------------------------------------------- layer norm

template <class T>
struct LayerNormCache {
  Mat<T> xhat;
  Eigen::Matrix<T, Eigen::Dynamic, 1> rstd;
};

template <class T>
Mat<T> layer_norm(const Mat<T>& x, const LayerNormParams<T>& p, LayerNormCache<T>* cache = nullptr) {
  const auto n = x.cols();
  Mat<T> xhat(x.rows(), n);
  Eigen::Matrix<T, Eigen::Dynamic, 1> rstd(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const T mean = x.row(r).mean();
    const auto centred = (x.row(r).array() - mean).eval();
    const T var = centred.square().mean();
    rstd(r) = T(1) / std::sqrt(var + static_cast<T>(kLayerNormEps));
    xhat.row(r) = centred * rstd(r);
  }
  Mat<T> y = (xhat.array().rowwise() * p.gamma.array()).matrix();
  y.rowwise() += p.beta;
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->rstd = std::move(rstd);
  }
  return y;
}

template <class T>
Mat<T> layer_norm_backward(const Mat<T>& dy, const LayerNormCache<T>& c, const LayerNormParams<T>& p,
                           LayerNormParams<T>& g) {
  g.gamma += (dy.array() * c.xhat.array()).colwise().sum().matrix();
  g.beta += dy.colwise().sum();
  const Mat<T> dxhat = (dy.array().rowwise() * p.gamma.array()).matrix();
  Mat<T> dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const T m1 = dxhat.row(r).mean();
    const T m2 = (dxhat.row(r).array() * c.xhat.row(r).array()).mean();
    dx.row(r) = c.rstd(r) * (dxhat.row(r).array() - m1 - c.xhat.row(r).array() * m2);
  }
  return dx;
}

// ---------------------------------------------------------------- GELU

template <class T>
T gelu(T x) {
  return T(0.5) * x * (T(1) + std::erf(x / std::numbers::sqrt2_v<T>));
}

template <class T>
T gelu_grad(T x) {
  const T pdf = std::exp(T(-0.5) * x * x) / std::sqrt(T(2) * std::numbers::pi_v<T>);
  return T(0.5) * (T(1) + std::erf(x / std::numbers::sqrt2_v<T>)) + x * pdf;
}

// ---------------------------------------------------------------- MLP

template <class T>
struct MlpCache {
  Mat<T> x, pre, act;
};

template <class T>
Mat<T> mlp(const Mat<T>& x, const MlpParams<T>& p, MlpCache<T>* cache = nullptr) {
  Mat<T> pre = linear(x, p.w1, p.b1);
  Mat<T> act = pre.unaryExpr([](T v) { return gelu(v); });
  Mat<T> y = linear(act, p.w2, p.b2);
  if (cache) {
    cache->x = x;
    cache->pre = std::move(pre);
    cache->act = std::move(act);
  }
  return y;
}

template <class T>
Mat<T> mlp_backward(const Mat<T>& dy, const MlpCache<T>& c, const MlpParams<T>& p, MlpParams<T>& g) {
  Mat<T> dact = linear_backward(dy, c.act, p.w2, g.w2, g.b2);
  const Mat<T> dpre = (dact.array() * c.pre.unaryExpr([](T v) { return gelu_grad(v); }).array()).matrix();
  return linear_backward(dpre, c.x, p.w1, g.w1, g.b1);
}

// ---------------------------------------------------------------- attention

/// Row softmax in place over columns [0, limit(r)); columns beyond are zero.
/// The normalizer is accumulated in double so rows sum to one tightly even
/// in single precision.
template <class T, class Limit>
void softmax_rows(Mat<T>& s, Limit limit) {
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const Eigen::Index n = limit(r);
    auto row = s.row(r);
    const T mx = row.head(n).maxCoeff();
    double sum = 0.0;
    for (Eigen::Index c = 0; c < n; ++c) {
      row(c) = std::exp(row(c) - mx);
      sum += static_cast<double>(row(c));
    }
    const T inv = static_cast<T>(1.0 / sum);
    row.head(n) *= inv;
    row.tail(s.cols() - n).setZero();
  }
}

template <class T>
struct AttentionCache {
  Mat<T> xq, xkv;   // inputs
  Mat<T> q, k, v;   // projections, all heads side by side
  std::vector<Mat<T>> probs;  // per head, Tq x Tk
  Mat<T> o;         // concatenated head outputs
};

/// Multi-head attention of queries from `xq` over keys/values from `xkv`.
/// With `causal`, query i sees keys 0..i. `probs_out` (optional) receives the
/// per-head attention matrices.
template <class T>
Mat<T> attention(const Mat<T>& xq, const Mat<T>& xkv, const AttentionParams<T>& p, int n_heads, bool causal,
                 AttentionCache<T>* cache = nullptr, std::vector<Mat<T>>* probs_out = nullptr) {
  const auto tq = xq.rows(), tk = xkv.rows(), d = xq.cols();
  const auto dh = d / n_heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  Mat<T> q = linear(xq, p.wq, p.bq);
  Mat<T> k = linear(xkv, p.wk, p.bk);
  Mat<T> v = linear(xkv, p.wv, p.bv);
  Mat<T> o(tq, d);
  std::vector<Mat<T>> probs(static_cast<std::size_t>(n_heads));
  for (int h = 0; h < n_heads; ++h) {
    Mat<T> s = (q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose()) * scale;
    if (causal) {
      softmax_rows(s, [](Eigen::Index r) { return r + 1; });
    } else {
      softmax_rows(s, [tk](Eigen::Index) { return tk; });
    }
    o.middleCols(h * dh, dh).noalias() = s * v.middleCols(h * dh, dh);
    probs[static_cast<std::size_t>(h)] = std::move(s);
  }
  Mat<T> y = linear(o, p.wo, p.bo);
  if (probs_out) *probs_out = probs;
  if (cache) {
    cache->xq = xq;
    cache->xkv = xkv;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->probs = std::move(probs);
    cache->o = std::move(o);
  }
  return y;
}

/// Returns (d xq, d xkv). For self-attention the caller adds the two.
template <class T>
std::pair<Mat<T>, Mat<T>> attention_backward(const Mat<T>& dy, const AttentionCache<T>& c, const AttentionParams<T>& p,
                                             AttentionParams<T>& g, int n_heads) {
  const auto d = c.q.cols();
  const auto dh = d / n_heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  const Mat<T> d_o = linear_backward(dy, c.o, p.wo, g.wo, g.bo);
  Mat<T> dq(c.q.rows(), d), dk(c.k.rows(), d), dv(c.v.rows(), d);
  for (int h = 0; h < n_heads; ++h) {
    const auto& a = c.probs[static_cast<std::size_t>(h)];
    const auto doh = d_o.middleCols(h * dh, dh);
    const Mat<T> da = doh * c.v.middleCols(h * dh, dh).transpose();
    dv.middleCols(h * dh, dh).noalias() = a.transpose() * doh;
    // Softmax Jacobian row by row: ds = a * (da - <da, a>).
    const Eigen::Matrix<T, Eigen::Dynamic, 1> dot = (da.array() * a.array()).rowwise().sum();
    Mat<T> ds = (a.array() * (da.array().colwise() - dot.array())).matrix() * scale;
    dq.middleCols(h * dh, dh).noalias() = ds * c.k.middleCols(h * dh, dh);
    dk.middleCols(h * dh, dh).noalias() = ds.transpose() * c.q.middleCols(h * dh, dh);
  }
  Mat<T> dxq = linear_backward(dq, c.xq, p.wq, g.wq, g.bq);
  Mat<T> dxkv = linear_backward(dk, c.xkv, p.wk, g.wk, g.bk);
  dxkv += linear_backward(dv, c.xkv, p.wv, g.wv, g.bv);
  return {std::move(dxq), std::move(dxkv)};
}

}  // namespace hatformer::model
