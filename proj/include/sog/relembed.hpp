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
#include <vector>

#include "sog/grid.hpp"
#include "sog/params.hpp"
#include "sog/rng.hpp"
#include "sog/scenegen.hpp"
#include "sog/tensor.hpp"

namespace sog {

inline constexpr std::size_t kAppearanceDim = kPatchSize * kPatchSize;

struct EmbedDims {
  std::size_t n_classes = 4;  // thing classes
  std::size_t r_c = 16, r_m = 16;
  std::size_t d_c = 16, d_m = 16, d_b = 16;

  std::size_t d() const { return d_m + d_c + d_b; }
  friend bool operator==(const EmbedDims&, const EmbedDims&) = default;
};

/// Learnable tensors of the relational embedding, held in a ParamStore under
/// the names V, U, P (category), V_m, U_m, P_m (appearance), K (geometry),
/// w_fc and b_fc (the single-channel output layer).
struct EmbedModel {
  EmbedDims dims;
  ParamStore params;

  static EmbedModel create(const EmbedDims& dims, std::uint64_t seed) {
    require(dims.n_classes > 0 && dims.r_c > 0 && dims.r_m > 0 && dims.d_c > 0 &&
                dims.d_m > 0 && dims.d_b > 0,
            "EmbedDims: all dimensions must be positive");
    EmbedModel m{dims, {}};
    Rng rng(seed);
    auto xavier = [&](Shape shape, std::size_t fan_in, std::size_t fan_out) {
      const double a = std::sqrt(6.0 / double(fan_in + fan_out));
      Tensor t(std::move(shape));
      for (auto& v : t.data()) v = rng.uniform(-a, a);
      return t;
    };
    const auto C = dims.n_classes, A = kAppearanceDim;
    m.params.add("V", xavier({C, dims.r_c}, C, dims.r_c));
    m.params.add("U", xavier({C, dims.r_c}, C, dims.r_c));
    m.params.add("P", xavier({dims.r_c, dims.d_c}, dims.r_c, dims.d_c));
    m.params.add("V_m", xavier({A, dims.r_m}, A, dims.r_m));
    m.params.add("U_m", xavier({A, dims.r_m}, A, dims.r_m));
    m.params.add("P_m", xavier({dims.r_m, dims.d_m}, dims.r_m, dims.d_m));
    m.params.add("K", xavier({4, dims.d_b}, 4, dims.d_b));
    m.params.add("w_fc", xavier({dims.d()}, dims.d(), 1));
    m.params.add("b_fc", Tensor({1}));
    return m;
  }
};

// ---------------------------------------------------------------------------
// Low-rank bilinear pair features: row (i,j) = Pᵀ(ReLU(Vᵀx_i) ∘ ReLU(Uᵀx_j)),
// stored at row i*N + j.

struct BilinearGrads {
  Tensor x, v, u, p;
};

namespace detail {

inline void check_bilinear(const Tensor& x, const Tensor& v, const Tensor& u, const Tensor& p) {
  require_rank(x, 2, "bilinear relation input");
  require_rank(v, 2, "bilinear relation V");
  require(v.shape() == u.shape(), "bilinear relation: V and U shapes differ");
  require(v.dim(0) == x.dim(1), "bilinear relation: input width " + std::to_string(x.dim(1)) +
                                    " does not match V rows " + std::to_string(v.dim(0)));
  require_rank(p, 2, "bilinear relation P");
  require(p.dim(0) == v.dim(1), "bilinear relation: P rows must equal the rank");
}

inline Tensor relu_of(Tensor t) {
  for (auto& x : t.data()) x = relu(x);
  return t;
}

}  // namespace detail

inline Tensor bilinear_relation(const Tensor& x, const Tensor& v, const Tensor& u,
                                const Tensor& p) {
  detail::check_bilinear(x, v, u, p);
  const std::size_t n = x.dim(0), r = v.dim(1), d = p.dim(1);
  const Tensor ha = detail::relu_of(matmul(x, v));
  const Tensor hb = detail::relu_of(matmul(x, u));
  Tensor out({n * n, d});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double* row = &out.at(i * n + j, 0);
      for (std::size_t k = 0; k < r; ++k) {
        const double h = ha.at(i, k) * hb.at(j, k);
        if (h == 0.0) continue;
        for (std::size_t c = 0; c < d; ++c) row[c] += h * p.at(k, c);
      }
    }
  return out;
}

inline BilinearGrads bilinear_relation_vjp(const Tensor& x, const Tensor& v, const Tensor& u,
                                           const Tensor& p, const Tensor& g) {
  detail::check_bilinear(x, v, u, p);
  const std::size_t n = x.dim(0), r = v.dim(1), d = p.dim(1);
  require_shape(g, {n * n, d}, "bilinear relation cotangent");
  const Tensor a = matmul(x, v), b = matmul(x, u);
  const Tensor ha = detail::relu_of(a), hb = detail::relu_of(b);

  Tensor gp({r, d}), gha({n, r}), ghb({n, r});
  std::vector<double> gh(r);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double* grow = &g.at(i * n + j, 0);
      for (std::size_t k = 0; k < r; ++k) {
        const double h = ha.at(i, k) * hb.at(j, k);
        double acc = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
          gp.at(k, c) += h * grow[c];
          acc += grow[c] * p.at(k, c);
        }
        gh[k] = acc;
      }
      for (std::size_t k = 0; k < r; ++k) {
        gha.at(i, k) += gh[k] * hb.at(j, k);
        ghb.at(j, k) += gh[k] * ha.at(i, k);
      }
    }
  // ReLU subgradient at 0 is 0.
  for (std::size_t k = 0; k < gha.size(); ++k) {
    if (!(a[k] > 0.0)) gha[k] = 0.0;
    if (!(b[k] > 0.0)) ghb[k] = 0.0;
  }
  BilinearGrads out;
  out.v = matmul_tn(x, gha);
  out.u = matmul_tn(x, ghb);
  out.p = std::move(gp);
  out.x = matmul_nt(gha, v);
  axpy(out.x, matmul_nt(ghb, u));
  return out;
}

inline Tensor category_relation(const Tensor& cats, const ParamStore& ps) {
  return bilinear_relation(cats, ps.value("V"), ps.value("U"), ps.value("P"));
}

inline Tensor appearance_relation(const Tensor& masks, const ParamStore& ps) {
  return bilinear_relation(masks, ps.value("V_m"), ps.value("U_m"), ps.value("P_m"));
}

/// Box-local mask resampled to 28 x 28 (corner-aligned) and flattened row-major.
inline Tensor resize_mask_patch(const Mask& mask, const Box& box) {
  require_box(box, "resize_mask_patch");
  Tensor patch = resample_box(mask, box, kPatchSize, kPatchSize);
  return Tensor({kAppearanceDim}, patch.vec());
}

// ---------------------------------------------------------------------------
// Relative geometry. Boxes are N x 4 rows (x, y, w, h); they are constants.

inline Tensor geometry_raw(const Tensor& boxes) {
  require_rank(boxes, 2, "geometry boxes");
  require(boxes.dim(1) == 4, "geometry boxes must be N x 4");
  const std::size_t n = boxes.dim(0);
  for (std::size_t i = 0; i < n; ++i)
    if (!(boxes.at(i, 2) > 0.0) || !(boxes.at(i, 3) > 0.0))
      throw ConfigError("geometry_relation: box " + std::to_string(i) +
                        " has non-positive width or height");
  Tensor raw({n * n, 4});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t row = i * n + j;
      raw.at(row, 0) = (boxes.at(i, 0) - boxes.at(j, 0)) / boxes.at(j, 2);
      raw.at(row, 1) = (boxes.at(i, 1) - boxes.at(j, 1)) / boxes.at(j, 3);
      raw.at(row, 2) = std::log(boxes.at(i, 2) / boxes.at(j, 2));
      raw.at(row, 3) = std::log(boxes.at(i, 3) / boxes.at(j, 3));
    }
  return raw;
}

inline Tensor geometry_relation(const Tensor& boxes, const Tensor& k) {
  require(k.rank() == 2 && k.dim(0) == 4, "geometry_relation: K must be 4 x d_b");
  return matmul(geometry_raw(boxes), k);
}

inline Tensor geometry_relation_vjp(const Tensor& boxes, const Tensor& g) {
  return matmul_tn(geometry_raw(boxes), g);
}

// ---------------------------------------------------------------------------

/// Column order is [appearance, category, geometry].
inline Tensor concat_relations(const Tensor& em, const Tensor& ec, const Tensor& eb) {
  require_rank(em, 2, "concat appearance");
  require_rank(ec, 2, "concat category");
  require_rank(eb, 2, "concat geometry");
  require(em.dim(0) == ec.dim(0) && ec.dim(0) == eb.dim(0),
          "concat_relations: row count mismatch");
  const std::size_t rows = em.dim(0), dm = em.dim(1), dc = ec.dim(1), db = eb.dim(1);
  Tensor out({rows, dm + dc + db});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < dm; ++c) out.at(r, c) = em.at(r, c);
    for (std::size_t c = 0; c < dc; ++c) out.at(r, dm + c) = ec.at(r, c);
    for (std::size_t c = 0; c < db; ++c) out.at(r, dm + dc + c) = eb.at(r, c);
  }
  return out;
}

struct ConcatGrads {
  Tensor em, ec, eb;
};

inline ConcatGrads concat_relations_vjp(const Tensor& g, std::size_t dm, std::size_t dc,
                                        std::size_t db) {
  require_rank(g, 2, "concat cotangent");
  require(g.dim(1) == dm + dc + db, "concat cotangent width mismatch");
  const std::size_t rows = g.dim(0);
  ConcatGrads out{Tensor({rows, dm}), Tensor({rows, dc}), Tensor({rows, db})};
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < dm; ++c) out.em.at(r, c) = g.at(r, c);
    for (std::size_t c = 0; c < dc; ++c) out.ec.at(r, c) = g.at(r, dm + c);
    for (std::size_t c = 0; c < db; ++c) out.eb.at(r, c) = g.at(r, dm + dc + c);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace detail {
inline std::size_t pair_count_side(std::size_t rows) {
  const auto n = static_cast<std::size_t>(std::llround(std::sqrt(double(rows))));
  require(n * n == rows, "relation features: row count " + std::to_string(rows) +
                             " is not a perfect square");
  return n;
}
}  // namespace detail

/// M_ij = sigmoid(E_(i,j) · w + b), reshaped to N x N.
inline Tensor potential_matrix(const Tensor& e, const Tensor& w, const Tensor& b) {
  require_rank(e, 2, "potential_matrix features");
  require_shape(w, {e.dim(1)}, "potential_matrix w_fc");
  require_shape(b, {1}, "potential_matrix b_fc");
  const std::size_t n = detail::pair_count_side(e.dim(0));
  Tensor m({n, n});
  for (std::size_t row = 0; row < n * n; ++row) {
    double z = b[0];
    for (std::size_t c = 0; c < e.dim(1); ++c) z += e.at(row, c) * w[c];
    m[row] = sigmoid(z);
  }
  return m;
}

struct PotentialGrads {
  Tensor e, w, b;
};

inline PotentialGrads potential_matrix_vjp(const Tensor& e, const Tensor& w, const Tensor& m,
                                           const Tensor& g) {
  const std::size_t rows = e.dim(0), d = e.dim(1);
  require(g.size() == rows && m.size() == rows, "potential_matrix_vjp: size mismatch");
  PotentialGrads out{Tensor({rows, d}), Tensor({d}), Tensor({1})};
  for (std::size_t row = 0; row < rows; ++row) {
    const double gz = g[row] * m[row] * (1.0 - m[row]);
    out.b[0] += gz;
    for (std::size_t c = 0; c < d; ++c) {
      out.e.at(row, c) = gz * w[c];
      out.w[c] += gz * e.at(row, c);
    }
  }
  return out;
}

/// O = ReLU(M - Mᵀ); O_ij > 0 means instance i is covered by j.
inline Tensor overlap_matrix(const Tensor& m) {
  require(m.rank() == 2 && m.dim(0) == m.dim(1), "overlap_matrix: M must be square");
  const std::size_t n = m.dim(0);
  Tensor o({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) o.at(i, j) = relu(m.at(i, j) - m.at(j, i));
  return o;
}

inline Tensor overlap_matrix_vjp(const Tensor& m, const Tensor& g) {
  require(m.rank() == 2 && m.dim(0) == m.dim(1), "overlap_matrix_vjp: M must be square");
  require(g.shape() == m.shape(), "overlap_matrix_vjp: cotangent shape mismatch");
  const std::size_t n = m.dim(0);
  Tensor gm({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (m.at(i, j) - m.at(j, i) > 0.0) {
        gm.at(i, j) += g.at(i, j);
        gm.at(j, i) -= g.at(i, j);
      }
  return gm;
}

// ---------------------------------------------------------------------------
// Whole module: (categories, appearance, boxes) -> O, with a chained backward.

struct EmbedInputs {
  Tensor cats;   // N x C_th
  Tensor masks;  // N x 784
  Tensor boxes;  // N x 4

  std::size_t size() const { return cats.rank() == 2 ? cats.dim(0) : 0; }
};

struct EmbedTrace {
  Tensor e;  // N² x d
  Tensor m;  // N x N
  Tensor o;  // N x N
};

inline EmbedInputs make_embed_inputs(const std::vector<Box>& boxes,
                                     const std::vector<std::size_t>& classes,
                                     const std::vector<const Mask*>& masks,
                                     std::size_t n_classes) {
  const std::size_t n = boxes.size();
  require(classes.size() == n && masks.size() == n, "make_embed_inputs: length mismatch");
  EmbedInputs in{Tensor({n, n_classes}), Tensor({n, kAppearanceDim}), Tensor({n, 4})};
  for (std::size_t i = 0; i < n; ++i) {
    require(classes[i] < n_classes, "make_embed_inputs: class id out of range");
    in.cats.at(i, classes[i]) = 1.0;
    const Tensor m = resize_mask_patch(*masks[i], boxes[i]);
    for (std::size_t k = 0; k < kAppearanceDim; ++k) in.masks.at(i, k) = m[k];
    in.boxes.at(i, 0) = boxes[i].x;
    in.boxes.at(i, 1) = boxes[i].y;
    in.boxes.at(i, 2) = boxes[i].w;
    in.boxes.at(i, 3) = boxes[i].h;
  }
  return in;
}

inline EmbedTrace embed_forward(const EmbedModel& model, const EmbedInputs& in) {
  const auto& ps = model.params;
  EmbedTrace t;
  const Tensor em = appearance_relation(in.masks, ps);
  const Tensor ec = category_relation(in.cats, ps);
  const Tensor eb = geometry_relation(in.boxes, ps.value("K"));
  t.e = concat_relations(em, ec, eb);
  t.m = potential_matrix(t.e, ps.value("w_fc"), ps.value("b_fc"));
  t.o = overlap_matrix(t.m);
  return t;
}

/// Accumulates dLoss/dparams into model.params given dLoss/dO.
inline void embed_backward(EmbedModel& model, const EmbedInputs& in, const EmbedTrace& t,
                           const Tensor& grad_o) {
  auto& ps = model.params;
  const Tensor gm = overlap_matrix_vjp(t.m, grad_o);
  const auto pg = potential_matrix_vjp(t.e, ps.value("w_fc"), t.m, gm);
  ps.accumulate("w_fc", pg.w);
  ps.accumulate("b_fc", pg.b);
  const auto& d = model.dims;
  const auto cg = concat_relations_vjp(pg.e, d.d_m, d.d_c, d.d_b);
  const auto ag = bilinear_relation_vjp(in.masks, ps.value("V_m"), ps.value("U_m"),
                                        ps.value("P_m"), cg.em);
  ps.accumulate("V_m", ag.v);
  ps.accumulate("U_m", ag.u);
  ps.accumulate("P_m", ag.p);
  const auto kg = bilinear_relation_vjp(in.cats, ps.value("V"), ps.value("U"), ps.value("P"),
                                        cg.ec);
  ps.accumulate("V", kg.v);
  ps.accumulate("U", kg.u);
  ps.accumulate("P", kg.p);
  ps.accumulate("K", geometry_relation_vjp(in.boxes, cg.eb));
}

}  // namespace sog
