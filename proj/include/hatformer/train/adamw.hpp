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

#include <cmath>
#include <string>

#include "hatformer/model/params.hpp"

namespace hatformer::train {

/// Weight decay skips biases, layer-norm parameters and the class token.
inline bool is_decayed(const std::string& name) {
  for (const char* suffix : {".b", ".bq", ".bk", ".bv", ".bo", ".b1", ".b2", ".gamma", ".beta", ".cls"}) {
    if (name.ends_with(suffix)) return false;
  }
  return true;
}

/// Adam with decoupled weight decay.
template <class T>
class AdamW {
public:
  AdamW(const model::ModelParams<T>& like, double beta1, double beta2, double eps, double weight_decay)
      : m_(model::zeros_like(like)), v_(model::zeros_like(like)), beta1_(beta1), beta2_(beta2), eps_(eps),
        weight_decay_(weight_decay) {}

  long long steps() const { return t_; }

  void step(model::ModelParams<T>& p, const model::ModelParams<T>& g, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    model::visit_tensors(
        [&](const std::string& name, auto& w, const auto& gw, auto& m, auto& v) {
          const T decay = is_decayed(name) ? static_cast<T>(lr * weight_decay_) : T(0);
          for (Eigen::Index i = 0; i < w.size(); ++i) {
            const double gi = gw.data()[i];
            const double mi = beta1_ * m.data()[i] + (1 - beta1_) * gi;
            const double vi = beta2_ * v.data()[i] + (1 - beta2_) * gi * gi;
            m.data()[i] = static_cast<T>(mi);
            v.data()[i] = static_cast<T>(vi);
            const double update = (mi / c1) / (std::sqrt(vi / c2) + eps_);
            w.data()[i] -= static_cast<T>(lr * update) + decay * w.data()[i];
          }
        },
        p, g, m_, v_);
  }

private:
  model::ModelParams<T> m_, v_;
  double beta1_, beta2_, eps_, weight_decay_;
  long long t_ = 0;
};

template <class T>
double global_norm(const model::ModelParams<T>& g) {
  double s = 0.0;
  model::visit_tensors([&](const std::string&, const auto& t) { s += t.template cast<double>().squaredNorm(); }, g);
  return std::sqrt(s);
}

template <class T>
void scale(model::ModelParams<T>& g, double factor) {
  model::visit_tensors([&](const std::string&, auto& t) { t *= static_cast<T>(factor); }, g);
}

}  // namespace hatformer::train
