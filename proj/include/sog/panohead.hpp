// Copyright 2026 The SOG Authors. All Rights Reserved.
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
#include <cstdint>
#include <string>

#include "sog/grid.hpp"
#include "sog/resolver.hpp"
#include "sog/tensor.hpp"

namespace sog {

inline constexpr std::int32_t kVoidId = -1;

enum class HeadVariant { kPH1 = 1, kPH2 = 2 };

inline HeadVariant parse_head(int v) {
  if (v == 1) return HeadVariant::kPH1;
  if (v == 2) return HeadVariant::kPH2;
  throw ConfigError("panoptic head variant must be 1 or 2, got " + std::to_string(v));
}

/// Channel `channel` of the semantic logits inside the box, zero elsewhere.
inline Tensor extract_sem_logit(const Tensor& sem, const Box& box, std::size_t channel) {
  require_rank(sem, 3, "extract_sem_logit semantic logits");
  require_box(box, "extract_sem_logit");
  if (channel >= sem.dim(2))
    throw ConfigError("extract_sem_logit: class id " + std::to_string(channel) +
                      " outside " + std::to_string(sem.dim(2)) + " semantic channels");
  const std::size_t H = sem.dim(0), W = sem.dim(1);
  Tensor x({H, W});
  for (std::size_t r = 0; r < H; ++r) {
    if (!detail::inside(double(r), box.y, box.h)) continue;
    for (std::size_t c = 0; c < W; ++c)
      if (detail::inside(double(c), box.x, box.w)) x.at(r, c) = sem.at(r, c, channel);
  }
  return x;
}

// Z = X + A'
inline Tensor combine_ph1(const Tensor& x, const Tensor& a) {
  require(x.shape() == a.shape(), "combine_ph1: shape mismatch");
  Tensor z = a;
  axpy(z, x);
  return z;
}

// Z = k X ∘ s(A') + A'
inline Tensor combine_ph2(const Tensor& x, const Tensor& a, double k) {
  require(x.shape() == a.shape(), "combine_ph2: shape mismatch");
  Tensor z(a.shape());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = k * x[i] * sigmoid(a[i]) + a[i];
  return z;
}

struct CombineGrads {
  Tensor x, a;
};

inline CombineGrads combine_ph2_vjp(const Tensor& x, const Tensor& a, double k, const Tensor& g) {
  require(x.shape() == a.shape() && g.shape() == a.shape(), "combine_ph2_vjp: shape mismatch");
  CombineGrads out{Tensor(a.shape()), Tensor(a.shape())};
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double s = sigmoid(a[i]);
    out.x[i] = g[i] * k * s;
    out.a[i] = g[i] * (1.0 + k * x[i] * s * (1.0 - s));
  }
  return out;
}

inline Tensor combine(HeadVariant head, double k, const Tensor& x, const Tensor& a) {
  return head == HeadVariant::kPH1 ? combine_ph1(x, a) : combine_ph2(x, a, k);
}

// Gradient with respect to A' only (X is a constant input here).
inline Tensor combine_vjp_a(HeadVariant head, double k, const Tensor& x, const Tensor& a,
                            const Tensor& g) {
  if (head == HeadVariant::kPH1) return g;
  return combine_ph2_vjp(x, a, k, g).a;
}

/// Channel concatenation, instance channels first.
inline Tensor assemble(const Tensor& z_inst, const Tensor& z_stuff) {
  require_rank(z_inst, 3, "assemble instance logits");
  require_rank(z_stuff, 3, "assemble stuff logits");
  require(z_inst.dim(0) == z_stuff.dim(0) && z_inst.dim(1) == z_stuff.dim(1),
          "assemble: spatial size mismatch");
  const std::size_t hw = z_inst.dim(0) * z_inst.dim(1);
  const std::size_t n = z_inst.dim(2), s = z_stuff.dim(2);
  Tensor out({z_inst.dim(0), z_inst.dim(1), n + s});
  for (std::size_t p = 0; p < hw; ++p) {
    for (std::size_t c = 0; c < n; ++c) out[p * (n + s) + c] = z_inst[p * n + c];
    for (std::size_t c = 0; c < s; ++c) out[p * (n + s) + n + c] = z_stuff[p * s + c];
  }
  return out;
}

// Instance part of an assembled cotangent.
inline Tensor assemble_vjp_inst(const Tensor& g, std::size_t n) {
  require_rank(g, 3, "assemble_vjp cotangent");
  const std::size_t hw = g.dim(0) * g.dim(1), k = g.dim(2);
  require(n <= k, "assemble_vjp: too many instance channels");
  Tensor out({g.dim(0), g.dim(1), n});
  for (std::size_t p = 0; p < hw; ++p)
    for (std::size_t c = 0; c < n; ++c) out[p * n + c] = g[p * k + c];
  return out;
}

struct LossWithGrad {
  double loss = 0.0;
  Tensor grad;
};

/// Mean per-pixel cross-entropy over non-void pixels, with its gradient.
inline LossWithGrad panoptic_ce_loss_with_grad(const Tensor& logits, const IdGrid& gt) {
  require_rank(logits, 3, "panoptic_ce_loss logits");
  require(gt.height() == logits.dim(0) && gt.width() == logits.dim(1),
          "panoptic_ce_loss: id map size mismatch");
  const std::size_t hw = gt.size(), k = logits.dim(2);
  std::size_t count = 0;
  for (std::size_t p = 0; p < hw; ++p) {
    if (gt[p] == kVoidId) continue;
    if (gt[p] < 0 || std::size_t(gt[p]) >= k)
      throw ConfigError("panoptic_ce_loss: target id " + std::to_string(gt[p]) +
                        " outside " + std::to_string(k) + " channels");
    ++count;
  }
  if (count == 0) throw ConfigError("panoptic_ce_loss: every pixel is void");

  LossWithGrad out{0.0, Tensor(logits.shape())};
  const double inv = 1.0 / double(count);
  for (std::size_t p = 0; p < hw; ++p) {
    if (gt[p] == kVoidId) continue;
    const double* z = &logits[p * k];
    double zmax = z[0];
    for (std::size_t c = 1; c < k; ++c) zmax = std::max(zmax, z[c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) sum += std::exp(z[c] - zmax);
    const double lse = zmax + std::log(sum);
    out.loss += (lse - z[gt[p]]) * inv;
    double* g = &out.grad[p * k];
    for (std::size_t c = 0; c < k; ++c) g[c] = std::exp(z[c] - lse) * inv;
    g[gt[p]] -= inv;
  }
  return out;
}

inline double panoptic_ce_loss(const Tensor& logits, const IdGrid& gt) {
  return panoptic_ce_loss_with_grad(logits, gt).loss;
}

/// Per-pixel argmax; ties go to the lowest channel. Zero channels yields void.
inline IdGrid infer_ids(const Tensor& logits) {
  require_rank(logits, 3, "infer_ids logits");
  const std::size_t k = logits.dim(2);
  IdGrid ids(logits.dim(0), logits.dim(1), kVoidId);
  if (k == 0) return ids;
  for (std::size_t p = 0; p < ids.size(); ++p) {
    const double* z = &logits[p * k];
    std::size_t best = 0;
    for (std::size_t c = 1; c < k; ++c)
      if (z[c] > z[best]) best = c;
    ids[p] = std::int32_t(best);
  }
  return ids;
}

}  // namespace sog
