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

// Independent reference implementations used by the unit tests and the
// acceptance binary. They favour direct loops over speed.

#include <cmath>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include "sog/grid.hpp"
#include "sog/metrics.hpp"
#include "sog/rng.hpp"
#include "sog/tensor.hpp"

namespace sog::testing {

inline double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Per-channel loop form: A'_i = A_i (1 - s(A_i) Σ_j s(A_j) O_ij).
inline Tensor resolve_oracle(const Tensor& a, const Tensor& o) {
  const std::size_t H = a.dim(0), W = a.dim(1), n = a.dim(2);
  Tensor out(a.shape());
  for (std::size_t r = 0; r < H; ++r)
    for (std::size_t c = 0; c < W; ++c)
      for (std::size_t i = 0; i < n; ++i) {
        double sum = 0;
        for (std::size_t j = 0; j < n; ++j) sum += sig(a.at(r, c, j)) * o.at(i, j);
        out.at(r, c, i) = a.at(r, c, i) * (1.0 - sig(a.at(r, c, i)) * sum);
      }
  return out;
}

// Antisymmetric-support O in [0,1) built from a random M.
inline Tensor random_overlap(std::size_t n, Rng& rng) {
  Tensor o({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = rng.uniform(-0.99, 0.99);
      (d > 0 ? o.at(i, j) : o.at(j, i)) = std::abs(d);
    }
  return o;
}

// Random rectangle of 80% density inside an H x W canvas.
inline Mask random_blob(std::size_t H, std::size_t W, Rng& rng) {
  Mask m(H, W);
  const long x = rng.uniform_int(0, long(W) - 4), y = rng.uniform_int(0, long(H) - 4);
  const long w = rng.uniform_int(2, long(W) - x), h = rng.uniform_int(2, long(H) - y);
  for (long r = y; r < y + h; ++r)
    for (long c = x; c < x + w; ++c)
      if (rng.bernoulli(0.8)) m(std::size_t(r), std::size_t(c)) = 1;
  return m;
}

// Pixel-count form of the significant-overlap matrix.
inline Tensor sym_relation_oracle(const std::vector<Mask>& masks) {
  const std::size_t n = masks.size();
  Tensor r({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      double ai = 0, aj = 0, in = 0;
      for (std::size_t p = 0; p < masks[i].size(); ++p) {
        ai += masks[i][p];
        aj += masks[j][p];
        in += masks[i][p] && masks[j][p];
      }
      const double smaller = std::min(ai, aj);
      if (smaller > 0 && in / smaller >= 0.1 - 1e-12) r.at(i, j) = 1.0;
    }
  return r;
}

// Pixel-count form of the covered-by matrix: i is covered by j when j's
// visible mask holds strictly more of the shared region.
inline Tensor rstar_oracle(const std::vector<Mask>& amodal, const std::vector<Mask>& visible) {
  const Tensor r = sym_relation_oracle(amodal);
  const std::size_t n = amodal.size();
  Tensor rs({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (r.at(i, j) == 0.0) continue;
      long vi = 0, vj = 0;
      for (std::size_t p = 0; p < amodal[i].size(); ++p)
        if (amodal[i][p] && amodal[j][p]) {
          vi += visible[i][p];
          vj += visible[j][p];
        }
      if (vj > vi) rs.at(i, j) = 1.0;
    }
  return rs;
}

struct OracleResult {
  std::map<std::int32_t, CategoryTally> tallies;
  std::map<std::int32_t, int> gt_matches;
};

// All-pairs IoU by direct pixel loops.
inline OracleResult brute_force_pq(const PanopticMap& pred, const PanopticMap& gt) {
  OracleResult out;
  const std::size_t n = gt.ids.size();
  auto count = [&](auto pred_fn) {
    std::size_t c = 0;
    for (std::size_t k = 0; k < n; ++k) c += pred_fn(k);
    return c;
  };
  std::set<std::int32_t> matched_p, matched_g;
  for (const auto& [pi, pinfo] : pred.segments) {
    const std::size_t pa = count([&](std::size_t k) { return pred.ids[k] == pi; });
    if (pa) out.tallies[pinfo.category].isthing |= pinfo.isthing;
    for (const auto& [gi, ginfo] : gt.segments) {
      if (ginfo.category != pinfo.category) continue;
      const std::size_t in =
          count([&](std::size_t k) { return pred.ids[k] == pi && gt.ids[k] == gi; });
      const std::size_t un = count([&](std::size_t k) {
        return (pred.ids[k] == pi && gt.ids[k] != kVoidSegment) || gt.ids[k] == gi;
      });
      if (in == 0) continue;
      const double iou = double(in) / double(un);
      if (iou > 0.5) {
        auto& t = out.tallies[ginfo.category];
        ++t.tp;
        t.iou_sum += iou;
        matched_p.insert(pi);
        matched_g.insert(gi);
        ++out.gt_matches[gi];
      }
    }
  }
  for (const auto& [gi, ginfo] : gt.segments) {
    const std::size_t ga = count([&](std::size_t k) { return gt.ids[k] == gi; });
    if (!ga) continue;
    out.tallies[ginfo.category].isthing |= ginfo.isthing;
    if (!matched_g.contains(gi)) ++out.tallies[ginfo.category].fn;
  }
  for (const auto& [pi, pinfo] : pred.segments) {
    const std::size_t pa = count([&](std::size_t k) { return pred.ids[k] == pi; });
    if (!pa || matched_p.contains(pi)) continue;
    const std::size_t on_void =
        count([&](std::size_t k) { return pred.ids[k] == pi && gt.ids[k] == kVoidSegment; });
    if (2 * on_void > pa) continue;
    ++out.tallies[pinfo.category].fp;
  }
  return out;
}

// Block-structured gt and a noisy relabelled copy as prediction.
inline std::pair<PanopticMap, PanopticMap> random_pq_pair(Rng& rng) {
  const std::size_t H = 8, W = 8;
  PanopticMap gt, pred;
  gt.ids = IdGrid(H, W);
  const int nseg = int(rng.uniform_int(1, 5));
  for (int s = 1; s <= nseg; ++s) {
    const auto cat = std::int32_t(rng.uniform_int(0, 3));
    gt.segments[s] = {cat, cat < 2};
  }
  for (std::size_t r = 0; r < H; ++r)
    for (std::size_t c = 0; c < W; ++c) {
      const int block = int((r / 4) * 2 + c / 4);
      gt.ids(r, c) = rng.bernoulli(0.1) ? kVoidSegment : std::int32_t(1 + block % nseg);
    }
  pred.ids = IdGrid(H, W);
  std::map<std::int32_t, std::int32_t> rename;
  for (const auto& [id, info] : gt.segments) {
    rename[id] = id + 10;
    SegmentInfo pi = info;
    if (rng.bernoulli(0.2)) pi.category = std::int32_t(rng.uniform_int(0, 3)), pi.isthing = pi.category < 2;
    pred.segments[id + 10] = pi;
  }
  pred.segments[99] = {1, true};
  for (std::size_t k = 0; k < H * W; ++k) {
    const double u = rng.uniform();
    if (u < 0.15) pred.ids[k] = 99;
    else if (u < 0.25) pred.ids[k] = kVoidSegment;
    else if (u < 0.4) pred.ids[k] = 10 + std::int32_t(rng.uniform_int(1, nseg));
    else pred.ids[k] = gt.ids[k] == kVoidSegment ? 99 : rename[gt.ids[k]];
  }
  return {pred, gt};
}

}  // namespace sog::testing
