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
 * @file beam_search.hpp
 * @brief Length-normalized beam search and greedy decoding.
 *
 * A hypothesis y is the generated token sequence, ending in the end token
 * when finished. Its score is (sum of log p) / |y|^alpha, where |y| counts
 * the end token. At every step each live hypothesis is expanded by every
 * token; the beam_width best candidates (by summed log-probability, ties to
 * the lexicographically smaller sequence) are kept, and those ending in the
 * end token move to the finished set. The greedy hypothesis is always
 * considered as well, so the result never scores below greedy decoding.
 *
 * The search is written against a Scorer concept so it can be checked on
 * small synthetic models:
 *
 *   using State = ...;
 *   State initial() const;                          // after the start token
 *   std::vector<double> log_probs(const State&) const;
 *   State advance(const State&, TokenId) const;
 *   TokenId end_token() const;
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "hatformer/model/transformer.hpp"

namespace hatformer::model {

struct DecodeConfig {
  int beam_width = 3;
  double length_penalty = 0.5;
  int max_len = 64;

  void validate() const {
    if (beam_width < 1) throw ConfigError("beam_width must be at least 1");
    if (max_len < 1) throw ConfigError("max_len must be at least 1");
    if (!std::isfinite(length_penalty) || length_penalty < 0) {
      throw ConfigError("length_penalty must be finite and non-negative");
    }
  }
};

struct DecodeResult {
  std::vector<TokenId> tokens;  // without the end token
  double score = -std::numeric_limits<double>::infinity();
  double log_prob = -std::numeric_limits<double>::infinity();
  /// False when no hypothesis reached the end token within max_len.
  bool finished = false;
};

inline double length_normalized(double log_prob, std::size_t length, double alpha) {
  return alpha == 0.0 ? log_prob : log_prob / std::pow(static_cast<double>(length), alpha);
}

namespace detail {

struct Hyp {
  std::vector<TokenId> seq;  // includes the end token when finished
  double log_prob = 0.0;
  double score = 0.0;
};

// Better score first; ties to shorter, then lexicographically smaller.
inline bool better(const Hyp& a, const Hyp& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.seq.size() != b.seq.size()) return a.seq.size() < b.seq.size();
  return a.seq < b.seq;
}

inline DecodeResult to_result(const Hyp& h, bool finished) {
  DecodeResult r;
  r.tokens = h.seq;
  if (finished) r.tokens.pop_back();
  r.score = h.score;
  r.log_prob = h.log_prob;
  r.finished = finished;
  return r;
}

}  // namespace detail

/// Argmax decoding (ties to the smaller token id).
template <class Scorer>
DecodeResult greedy_decode(const Scorer& scorer, int max_len, double alpha = 0.0) {
  auto state = scorer.initial();
  detail::Hyp h;
  for (int t = 0; t < max_len; ++t) {
    const auto lp = scorer.log_probs(state);
    // Compare running totals, exactly as the beam ranks its candidates.
    std::size_t best = 0;
    for (std::size_t v = 1; v < lp.size(); ++v) {
      if (h.log_prob + lp[v] > h.log_prob + lp[best]) best = v;
    }
    h.seq.push_back(static_cast<TokenId>(best));
    h.log_prob += lp[best];
    h.score = length_normalized(h.log_prob, h.seq.size(), alpha);
    if (static_cast<TokenId>(best) == scorer.end_token()) return detail::to_result(h, true);
    if (t + 1 < max_len) state = scorer.advance(state, static_cast<TokenId>(best));
  }
  return detail::to_result(h, false);
}

template <class Scorer>
DecodeResult beam_search(const Scorer& scorer, const DecodeConfig& cfg) {
  cfg.validate();
  const double alpha = cfg.length_penalty;
  const TokenId eos = scorer.end_token();
  using State = decltype(scorer.initial());

  struct Live {
    detail::Hyp hyp;
    State state;
  };
  std::vector<Live> live;
  live.push_back({{}, scorer.initial()});
  std::vector<detail::Hyp> finished;
  std::optional<detail::Hyp> best_unfinished;

  for (int t = 0; t < cfg.max_len && !live.empty(); ++t) {
    struct Cand {
      std::size_t parent;
      TokenId token;
      double log_prob;
    };
    std::vector<Cand> cands;
    for (std::size_t i = 0; i < live.size(); ++i) {
      const auto lp = scorer.log_probs(live[i].state);
      for (std::size_t v = 0; v < lp.size(); ++v) {
        if (lp[v] == -std::numeric_limits<double>::infinity()) continue;
        cands.push_back({i, static_cast<TokenId>(v), live[i].hyp.log_prob + lp[v]});
      }
    }
    auto seq_less = [&](const Cand& a, const Cand& b) {
      const auto& sa = live[a.parent].hyp.seq;
      const auto& sb = live[b.parent].hyp.seq;
      if (sa != sb) return sa < sb;
      return a.token < b.token;
    };
    const auto keep = std::min<std::size_t>(cands.size(), static_cast<std::size_t>(cfg.beam_width));
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                      [&](const Cand& a, const Cand& b) {
                        if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
                        return seq_less(a, b);
                      });
    std::vector<Live> next;
    for (std::size_t k = 0; k < keep; ++k) {
      const auto& c = cands[k];
      detail::Hyp h{live[c.parent].hyp.seq, c.log_prob, 0.0};
      h.seq.push_back(c.token);
      h.score = length_normalized(h.log_prob, h.seq.size(), alpha);
      if (c.token == eos) {
        finished.push_back(std::move(h));
      } else if (t + 1 < cfg.max_len) {
        next.push_back({h, scorer.advance(live[c.parent].state, c.token)});
      } else if (!best_unfinished || detail::better(h, *best_unfinished)) {
        best_unfinished = std::move(h);
      }
    }
    live = std::move(next);

    // Stop once no live hypothesis can still overtake the best finished one:
    // an extension has log p <= L and length <= max_len, so its score is at
    // most L / max_len^alpha.
    if (!finished.empty() && !live.empty()) {
      const auto& best = *std::min_element(finished.begin(), finished.end(), detail::better);
      double bound = -std::numeric_limits<double>::infinity();
      for (const auto& l : live) bound = std::max(bound, length_normalized(l.hyp.log_prob, static_cast<std::size_t>(cfg.max_len), alpha));
      if (best.score >= bound) live.clear();
    }
  }

  // A width-1 beam already is the greedy path.
  if (cfg.beam_width > 1) {
    const auto greedy = greedy_decode(scorer, cfg.max_len, alpha);
    detail::Hyp g{greedy.tokens, greedy.log_prob, greedy.score};
    if (greedy.finished) {
      g.seq.push_back(eos);
      finished.push_back(std::move(g));
    } else if (!best_unfinished || detail::better(g, *best_unfinished)) {
      best_unfinished = std::move(g);
    }
  }
  if (!finished.empty()) {
    return detail::to_result(*std::min_element(finished.begin(), finished.end(), detail::better), true);
  }
  return detail::to_result(*best_unfinished, false);
}

/// Scorer over a trained model for one encoded image.
template <class T>
class TransformerScorer {
public:
  using State = DecoderState<T>;

  TransformerScorer(const ModelParams<T>& params, const Mat<T>& memory)
      : params_(params), cross_(precompute_cross(memory, params)) {}

  State initial() const {
    auto s = initial_state(params_);
    decode_step(s, bbpe::kBos, *cross_, params_);
    return s;
  }
  std::vector<double> log_probs(const State& s) const { return log_softmax(s.logits); }
  State advance(const State& s, TokenId token) const {
    State n = s;
    decode_step(n, token, *cross_, params_);
    return n;
  }
  TokenId end_token() const { return bbpe::kEos; }

private:
  const ModelParams<T>& params_;
  std::shared_ptr<const CrossMemory<T>> cross_;
};

/// Beam search from an encoded image; max_len is capped by the model's
/// decoder positions.
template <class T>
DecodeResult beam_search(const Mat<T>& memory, const ModelParams<T>& p, DecodeConfig cfg) {
  cfg.max_len = std::min(cfg.max_len, p.config.max_decode_len);
  return beam_search(TransformerScorer<T>(p, memory), cfg);
}

}  // namespace hatformer::model
