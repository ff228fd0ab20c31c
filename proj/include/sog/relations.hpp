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

#include <algorithm>
#include <vector>

#include "sog/grid.hpp"
#include "sog/panohead.hpp"
#include "sog/tensor.hpp"

namespace sog {

inline constexpr double kOverlapRatio = 0.1;
inline constexpr double kOverlapAccuracyThreshold = 0.5;

/// R_ij = 1 iff |M_i ∘ M_j| / min(|M_i|, |M_j|) >= 0.1 for i != j.
/// Empty masks relate to nothing.
inline Tensor sym_relation(const std::vector<Mask>& amodal) {
  const std::size_t n = amodal.size();
  std::vector<std::size_t> areas(n);
  for (std::size_t i = 0; i < n; ++i) areas[i] = area(amodal[i]);
  Tensor r({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const std::size_t smaller = std::min(areas[i], areas[j]);
      if (smaller == 0) continue;
      const auto inter = intersection_area(amodal[i], amodal[j]);
      // Integer form of inter / smaller >= 0.1, exact at the boundary.
      if (10 * inter >= smaller) r.at(i, j) = r.at(j, i) = 1.0;
    }
  return r;
}

/// Approximate "who covers whom" from amodal vs visible masks. R*_ij = 1 when
/// instance j's visible mask holds strictly more of the pair's intersection
/// than instance i's. Only pairs with significant overlap are considered.
inline Tensor approx_overlap_gt(const std::vector<Mask>& amodal,
                                const std::vector<Mask>& visible) {
  require(amodal.size() == visible.size(), "approx_overlap_gt: mask count mismatch");
  const std::size_t n = amodal.size();
  for (std::size_t i = 0; i < n; ++i) {
    require(visible[i].size() == amodal[i].size(), "approx_overlap_gt: mask size mismatch");
    for (std::size_t p = 0; p < amodal[i].size(); ++p)
      if (visible[i][p] && !amodal[i][p])
        throw ConfigError("approx_overlap_gt: visible mask " + std::to_string(i) +
                          " is not contained in its amodal mask");
  }
  const Tensor r = sym_relation(amodal);
  Tensor rs({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      if (r.at(i, j) == 0.0) continue;
      std::size_t vis_i = 0, vis_j = 0;
      for (std::size_t p = 0; p < amodal[i].size(); ++p) {
        if (!(amodal[i][p] && amodal[j][p])) continue;
        vis_i += visible[i][p] != 0;
        vis_j += visible[j][p] != 0;
      }
      if (vis_j > vis_i) rs.at(i, j) = 1.0;
      else if (vis_i > vis_j) rs.at(j, i) = 1.0;
    }
  return rs;
}

namespace detail {
inline void check_square_pair(const Tensor& a, const Tensor& b, const char* what) {
  require(a.rank() == 2 && a.dim(0) == a.dim(1) && a.shape() == b.shape(),
          std::string(what) + ": matrices must be square and equally sized");
}
}  // namespace detail

/// (1/N²) ‖O + Oᵀ − R‖²_F
inline LossWithGrad relation_loss(const Tensor& o, const Tensor& r) {
  detail::check_square_pair(o, r, "relation_loss");
  const std::size_t n = o.dim(0);
  LossWithGrad out{0.0, Tensor({n, n})};
  if (n == 0) return out;
  const double inv = 1.0 / double(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double res = o.at(i, j) + o.at(j, i) - r.at(i, j);
      out.loss += res * res * inv;
      // O_ij appears in residuals (i,j) and (j,i).
      out.grad.at(i, j) += 2.0 * res * inv;
      out.grad.at(j, i) += 2.0 * res * inv;
    }
  return out;
}

/// (1/N²) ‖O − R*‖²_F
inline LossWithGrad weak_relation_loss(const Tensor& o, const Tensor& rs) {
  detail::check_square_pair(o, rs, "weak_relation_loss");
  const std::size_t n = o.dim(0);
  LossWithGrad out{0.0, Tensor({n, n})};
  if (n == 0) return out;
  const double inv = 1.0 / double(n * n);
  for (std::size_t k = 0; k < o.size(); ++k) {
    const double res = o[k] - rs[k];
    out.loss += res * res * inv;
    out.grad[k] = 2.0 * res * inv;
  }
  return out;
}

/// Fraction of ordered off-diagonal pairs where [O_ij >= 0.5] equals R*_ij.
inline double overlap_accuracy(const Tensor& o, const Tensor& rs) {
  detail::check_square_pair(o, rs, "overlap_accuracy");
  const std::size_t n = o.dim(0);
  if (n < 2) throw ConfigError("overlap_accuracy: needs at least 2 instances");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const bool pred = o.at(i, j) >= kOverlapAccuracyThreshold;
      hits += pred == (rs.at(i, j) == 1.0);
    }
  return double(hits) / double(n * (n - 1));
}

/// Indices of instances that significantly overlap at least one other.
inline std::vector<std::size_t> filter_overlapping(const Tensor& r) {
  require(r.rank() == 2 && r.dim(0) == r.dim(1), "filter_overlapping: R must be square");
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < r.dim(0); ++i)
    for (std::size_t j = 0; j < r.dim(1); ++j)
      if (r.at(i, j) == 1.0) {
        keep.push_back(i);
        break;
      }
  return keep;
}

// Submatrix on rows/cols `idx`.
inline Tensor select_square(const Tensor& m, const std::vector<std::size_t>& idx) {
  Tensor out({idx.size(), idx.size()});
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t b = 0; b < idx.size(); ++b) out.at(a, b) = m.at(idx[a], idx[b]);
  return out;
}

// Inverse of select_square: N x N matrix, zero outside the subset.
inline Tensor scatter_square(const Tensor& sub, const std::vector<std::size_t>& idx,
                             std::size_t n) {
  Tensor out({n, n});
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t b = 0; b < idx.size(); ++b) out.at(idx[a], idx[b]) = sub.at(a, b);
  return out;
}

}  // namespace sog
