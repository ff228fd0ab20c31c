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

#include "sog/grid.hpp"
#include "sog/tensor.hpp"

namespace sog {

// Out-of-box value for pasted instance logits; sigmoid(-12) is about 6e-6.
inline constexpr double kPastePad = -12.0;

namespace detail {

// Patch coordinate for image coordinate `pos` inside [origin, origin+len-1].
inline double patch_coord(double pos, double origin, double len, std::size_t n) {
  if (len <= 1.0 || n <= 1) return 0.0;
  return (pos - origin) * double(n - 1) / (len - 1.0);
}

inline bool inside(double pos, double origin, double len) {
  return pos >= origin && pos <= origin + std::max(len - 1.0, 0.0);
}

template <typename Fn>
void for_each_box_pixel(const Box& box, std::size_t H, std::size_t W, std::size_t ph,
                        std::size_t pw, Fn&& fn) {
  const long r0 = std::max(0L, long(std::ceil(box.y)));
  const long c0 = std::max(0L, long(std::ceil(box.x)));
  for (long r = r0; r < long(H); ++r) {
    if (!inside(double(r), box.y, box.h)) break;
    const double pr = patch_coord(double(r), box.y, box.h, ph);
    for (long c = c0; c < long(W); ++c) {
      if (!inside(double(c), box.x, box.w)) break;
      const double pc = patch_coord(double(c), box.x, box.w, pw);
      fn(std::size_t(r), std::size_t(c), bilinear::tap(pr, pc, ph, pw));
    }
  }
}

}  // namespace detail

/// Bilinear paste of a box-local patch into an H x W canvas. The patch corners
/// land on the box corners; pixels outside the box get `pad`.
inline Tensor paste_patch(const Tensor& patch, const Box& box, std::size_t H, std::size_t W,
                          double pad = kPastePad) {
  require_rank(patch, 2, "paste_patch patch");
  require_box(box, "paste_patch");
  const std::size_t ph = patch.dim(0), pw = patch.dim(1);
  Tensor out({H, W}, pad);
  auto get = [&](std::size_t r, std::size_t c) { return patch.at(r, c); };
  detail::for_each_box_pixel(box, H, W, ph, pw, [&](auto r, auto c, const bilinear::Tap& t) {
    out.at(r, c) = bilinear::sample(t, get);
  });
  return out;
}

/// Adjoint of paste_patch with respect to the patch values.
inline Tensor paste_patch_vjp(const Box& box, std::size_t ph, std::size_t pw,
                              const Tensor& grad_out) {
  require_rank(grad_out, 2, "paste_patch_vjp cotangent");
  require_box(box, "paste_patch_vjp");
  Tensor g({ph, pw});
  auto put = [&](std::size_t r, std::size_t c, double v) { g.at(r, c) += v; };
  detail::for_each_box_pixel(box, grad_out.dim(0), grad_out.dim(1), ph, pw,
                             [&](auto r, auto c, const bilinear::Tap& t) {
                               bilinear::scatter(t, grad_out.at(r, c), put);
                             });
  return g;
}

// Writes an H x W map into channel `ch` of an H x W x N stack.
inline void set_channel(Tensor& stack, std::size_t ch, const Tensor& plane) {
  const std::size_t hw = plane.size(), n = stack.dim(2);
  for (std::size_t p = 0; p < hw; ++p) stack[p * n + ch] = plane[p];
}

inline Tensor get_channel(const Tensor& stack, std::size_t ch) {
  Tensor plane({stack.dim(0), stack.dim(1)});
  const std::size_t n = stack.dim(2);
  for (std::size_t p = 0; p < plane.size(); ++p) plane[p] = stack[p * n + ch];
  return plane;
}

namespace detail {
inline void check_resolve(const Tensor& a, const Tensor& o) {
  require_rank(a, 3, "resolve logits");
  require(o.rank() == 2 && o.dim(0) == a.dim(2) && o.dim(1) == a.dim(2),
          "resolve: overlap matrix must be N x N with N = " + std::to_string(a.dim(2)));
}
}  // namespace detail

/// A' = A - A ∘ s(A) ∘ (s(A) ×₃ Oᵀ), with the stack flattened to (H·W) x N.
inline Tensor resolve(const Tensor& a, const Tensor& o) {
  detail::check_resolve(a, o);
  const std::size_t n = a.dim(2), hw = a.dim(0) * a.dim(1);
  Tensor out = a;
  std::vector<double> s(n);
  for (std::size_t p = 0; p < hw; ++p) {
    const double* ap = &a[p * n];
    for (std::size_t j = 0; j < n; ++j) s[j] = sigmoid(ap[j]);
    for (std::size_t i = 0; i < n; ++i) {
      double t = 0.0;
      for (std::size_t j = 0; j < n; ++j) t += s[j] * o.at(i, j);
      if (t == 0.0) continue;
      out[p * n + i] = ap[i] - ap[i] * s[i] * t;
    }
  }
  return out;
}

struct ResolveGrads {
  Tensor a, o;
};

inline ResolveGrads resolve_vjp(const Tensor& a, const Tensor& o, const Tensor& g) {
  detail::check_resolve(a, o);
  require(g.shape() == a.shape(), "resolve_vjp: cotangent shape mismatch");
  const std::size_t n = a.dim(2), hw = a.dim(0) * a.dim(1);
  ResolveGrads out{Tensor(a.shape()), Tensor({n, n})};
  std::vector<double> s(n), t(n), q(n);
  for (std::size_t p = 0; p < hw; ++p) {
    const double* ap = &a[p * n];
    const double* gp = &g[p * n];
    for (std::size_t j = 0; j < n; ++j) {
      s[j] = sigmoid(ap[j]);
      q[j] = gp[j] * ap[j] * s[j];
    }
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += s[j] * o.at(i, j);
      t[i] = acc;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double ds = s[i] * (1.0 - s[i]);
      double qo = 0.0;  // Σ_k q_k O_ki
      for (std::size_t k = 0; k < n; ++k) qo += q[k] * o.at(k, i);
      out.a[p * n + i] =
          gp[i] * (1.0 - s[i] * t[i]) - gp[i] * ap[i] * ds * t[i] - ds * qo;
      if (q[i] != 0.0)
        for (std::size_t j = 0; j < n; ++j) out.o.at(i, j) -= q[i] * s[j];
    }
  }
  return out;
}

}  // namespace sog
