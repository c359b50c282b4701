// Copyright 2026 The kgcfuse Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Template definitions for models.hpp. Not meant to be included directly.

#ifndef KGCFUSE_MODELS_IMPL_HPP_
#define KGCFUSE_MODELS_IMPL_HPP_

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace kgcfuse {
namespace models_internal {

template <typename T>
T Softplus(T x) {
  return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
}

template <typename T>
T Sigmoid(T x) {
  if (x >= 0) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

// Per-sample cached "head composed with relation" vector [re | im]: the
// rotated head for RotatE, the complex product h*r for ComplEx.
template <typename T>
void ComposeHead(const EmbeddingTables<T>& tables, ModelKind kind,
                 const Triple& triple, std::vector<T>& composed,
                 std::vector<T>& cos_phase, std::vector<T>& sin_phase) {
  const std::size_t d = tables.dim;
  const T* h = tables.entity.data() + triple.head * tables.entity_width;
  const T* r = tables.relation.data() + triple.relation * tables.relation_width;
  composed.resize(2 * d);
  if (kind == ModelKind::kRotatE) {
    cos_phase.resize(d);
    sin_phase.resize(d);
    for (std::size_t i = 0; i < d; ++i) {
      const T c = std::cos(r[i]);
      const T s = std::sin(r[i]);
      cos_phase[i] = c;
      sin_phase[i] = s;
      composed[i] = h[i] * c - h[d + i] * s;
      composed[d + i] = h[i] * s + h[d + i] * c;
    }
  } else {
    for (std::size_t i = 0; i < d; ++i) {
      composed[i] = h[i] * r[i] - h[d + i] * r[d + i];
      composed[d + i] = h[i] * r[d + i] + h[d + i] * r[i];
    }
  }
}

// Model score (higher is better) of the composed head against one tail.
template <typename T>
T ComposedScore(const std::vector<T>& composed, const T* tail, std::size_t d,
                ModelKind kind, T gamma) {
  T acc = 0;
  if (kind == ModelKind::kRotatE) {
    for (std::size_t i = 0; i < d; ++i) {
      const T re = composed[i] - tail[i];
      const T im = composed[d + i] - tail[d + i];
      acc += std::sqrt(re * re + im * im);
    }
    return gamma - acc;
  }
  for (std::size_t i = 0; i < d; ++i) {
    acc += composed[i] * tail[i] + composed[d + i] * tail[d + i];
  }
  return acc;
}

// Adds upstream * d(score)/d(composed) into g_composed and
// upstream * d(score)/d(tail) into g_tail.
template <typename T>
void ComposedScoreGrad(const std::vector<T>& composed, const T* tail,
                       std::size_t d, ModelKind kind, T upstream,
                       std::vector<T>& g_composed, T* g_tail) {
  if (kind == ModelKind::kRotatE) {
    // score = gamma - sum |u_i|, u = composed - tail.
    for (std::size_t i = 0; i < d; ++i) {
      const T re = composed[i] - tail[i];
      const T im = composed[d + i] - tail[d + i];
      const T norm = std::sqrt(re * re + im * im);
      if (norm <= T(0)) continue;
      const T g_re = -upstream * re / norm;
      const T g_im = -upstream * im / norm;
      g_composed[i] += g_re;
      g_composed[d + i] += g_im;
      g_tail[i] -= g_re;
      g_tail[d + i] -= g_im;
    }
    return;
  }
  for (std::size_t i = 0; i < d; ++i) {
    g_composed[i] += upstream * tail[i];
    g_composed[d + i] += upstream * tail[d + i];
    g_tail[i] += upstream * composed[i];
    g_tail[d + i] += upstream * composed[d + i];
  }
}

}  // namespace models_internal

template <typename T>
std::vector<std::vector<T>> AdversarialWeights(
    const EmbeddingTables<T>& tables, std::span<const TrainingSample> batch,
    const LossOptions& options) {
  using namespace models_internal;
  std::vector<std::vector<T>> weights;
  weights.reserve(batch.size());
  std::vector<T> composed, cs, sn;
  const T gamma = static_cast<T>(options.gamma);
  const T temp = static_cast<T>(options.adversarial_temperature);
  for (const TrainingSample& sample : batch) {
    ComposeHead(tables, options.kind, sample.positive, composed, cs, sn);
    auto& w = weights.emplace_back(sample.negative_tails.size());
    T max_logit = -INFINITY;
    for (std::size_t j = 0; j < w.size(); ++j) {
      const T* tail = tables.entity.data() +
                      sample.negative_tails[j] * tables.entity_width;
      w[j] = temp * ComposedScore(composed, tail, tables.dim, options.kind,
                                  gamma);
      max_logit = std::max(max_logit, w[j]);
    }
    T total = 0;
    for (T& x : w) {
      x = std::exp(x - max_logit);
      total += x;
    }
    for (T& x : w) x /= total;
  }
  return weights;
}

template <typename T>
T BatchLoss(const EmbeddingTables<T>& tables,
            std::span<const TrainingSample> batch,
            const std::vector<std::vector<T>>& adversarial_weights,
            const LossOptions& options, SparseGrad<T>* entity_grad,
            SparseGrad<T>* relation_grad) {
  using namespace models_internal;
  const std::size_t d = tables.dim;
  const T gamma = static_cast<T>(options.gamma);
  const T reg = static_cast<T>(options.regularization);
  const T inv_batch = T(1) / static_cast<T>(batch.size());
  const bool want_grad = entity_grad != nullptr && relation_grad != nullptr;

  std::vector<T> composed, cs, sn, g_composed;
  T total = 0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const TrainingSample& sample = batch[b];
    const Triple& pos = sample.positive;
    const std::vector<T>& p = adversarial_weights[b];
    ComposeHead(tables, options.kind, pos, composed, cs, sn);
    if (want_grad) g_composed.assign(2 * d, T(0));

    const T* pos_tail = tables.entity.data() + pos.tail * tables.entity_width;
    const T s_pos = ComposedScore(composed, pos_tail, d, options.kind, gamma);
    T loss = T(0.5) * Softplus(-s_pos);
    if (want_grad) {
      const T up = -T(0.5) * Sigmoid(-s_pos) * inv_batch;
      ComposedScoreGrad(composed, pos_tail, d, options.kind, up, g_composed,
                        entity_grad->Row(pos.tail));
    }
    for (std::size_t j = 0; j < sample.negative_tails.size(); ++j) {
      const EntityId neg = sample.negative_tails[j];
      const T* tail = tables.entity.data() + neg * tables.entity_width;
      const T s = ComposedScore(composed, tail, d, options.kind, gamma);
      loss += T(0.5) * p[j] * Softplus(s);
      if (want_grad) {
        const T up = T(0.5) * p[j] * Sigmoid(s) * inv_batch;
        ComposedScoreGrad(composed, tail, d, options.kind, up, g_composed,
                          entity_grad->Row(neg));
      }
    }

    const T* h = tables.entity.data() + pos.head * tables.entity_width;
    const T* r = tables.relation.data() + pos.relation * tables.relation_width;
    if (reg > 0) {
      T sq = 0;
      for (std::size_t i = 0; i < tables.entity_width; ++i) {
        sq += h[i] * h[i] + pos_tail[i] * pos_tail[i];
      }
      for (std::size_t i = 0; i < tables.relation_width; ++i) sq += r[i] * r[i];
      loss += reg * sq;
      if (want_grad) {
        T* gh = entity_grad->Row(pos.head);
        for (std::size_t i = 0; i < tables.entity_width; ++i) {
          gh[i] += T(2) * reg * h[i] * inv_batch;
        }
        T* gt = entity_grad->Row(pos.tail);
        for (std::size_t i = 0; i < tables.entity_width; ++i) {
          gt[i] += T(2) * reg * pos_tail[i] * inv_batch;
        }
        T* gr = relation_grad->Row(pos.relation);
        for (std::size_t i = 0; i < tables.relation_width; ++i) {
          gr[i] += T(2) * reg * r[i] * inv_batch;
        }
      }
    }

    if (want_grad) {
      // Back through the head composition.
      T* gh = entity_grad->Row(pos.head);
      T* gr = relation_grad->Row(pos.relation);
      for (std::size_t i = 0; i < d; ++i) {
        const T g_re = g_composed[i];
        const T g_im = g_composed[d + i];
        if (options.kind == ModelKind::kRotatE) {
          gh[i] += g_re * cs[i] + g_im * sn[i];
          gh[d + i] += -g_re * sn[i] + g_im * cs[i];
          gr[i] += -g_re * composed[d + i] + g_im * composed[i];
        } else {
          const T rr = r[i], ri = r[d + i];
          const T hr = h[i], hi = h[d + i];
          gh[i] += g_re * rr + g_im * ri;
          gh[d + i] += -g_re * ri + g_im * rr;
          gr[i] += g_re * hr + g_im * hi;
          gr[d + i] += -g_re * hi + g_im * hr;
        }
      }
    }
    total += loss;
  }
  return total * inv_batch;
}

}  // namespace kgcfuse

#endif  // KGCFUSE_MODELS_IMPL_HPP_
