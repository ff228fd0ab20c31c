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

#include <functional>
#include <map>
#include <string>

#include "sog/gradcheck.hpp"
#include "sog/panohead.hpp"
#include "sog/relembed.hpp"
#include "sog/scenegen.hpp"
#include "sog/trainer.hpp"
#include "test_util.hpp"

namespace sog::testing {

inline double frob_dot(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "frob_dot: shape mismatch");
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Gradient check of a VJP: loss = <cotangent, f(inputs)>, analytic gradient
/// supplied by `vjp`, which fills one gradient per input name.
inline GradCheckReport check_vjp(
    std::map<std::string, Tensor> inputs,
    const std::function<Tensor(const ParamStore&)>& forward, const Tensor& cotangent,
    const std::function<std::map<std::string, Tensor>(const ParamStore&)>& vjp,
    std::uint64_t seed = 0) {
  ParamStore ps;
  for (auto& [name, t] : inputs) ps.add(name, t);
  for (const auto& [name, g] : vjp(ps)) ps.grad(name) = g;
  GradCheckOptions opt;
  opt.seed = seed;
  return finite_diff_check([&](const ParamStore& p) { return frob_dot(cotangent, forward(p)); },
                           ps, opt);
}

inline std::string describe(const GradCheckReport& r) {
  std::string s;
  for (const auto& e : r.entries)
    s += e.name + " " + std::to_string(e.max_rel_error) + " @" + std::to_string(e.worst_index) + "; ";
  return s;
}

// Smallest distance to a ReLU corner over all bilinear pre-activations.
inline double preactivation_margin(const Tensor& x, const Tensor& v, const Tensor& u) {
  double m = INFINITY;
  for (const Tensor* w : {&v, &u}) {
    const Tensor z = matmul(x, *w);
    for (double val : z.vec()) m = std::min(m, std::abs(val));
  }
  return m;
}

// Smallest |M_ij - M_ji| over off-diagonal pairs: distance to the O corner.
inline double antisymmetric_margin(const Tensor& m) {
  double out = INFINITY;
  for (std::size_t i = 0; i < m.dim(0); ++i)
    for (std::size_t j = 0; j < m.dim(0); ++j)
      if (i != j) out = std::min(out, std::abs(m.at(i, j) - m.at(j, i)));
  return out;
}

/// First model in the seeded stream whose pre-activations and M - Mᵀ stay
/// clear of every non-differentiable corner by more than the probe step.
inline EmbedModel kink_safe_model(const EmbedDims& dims, const EmbedInputs& in,
                                  std::uint64_t seed, double margin = 5e-3) {
  for (std::uint64_t k = 0;; ++k) {
    EmbedModel m = EmbedModel::create(dims, derive_seed(seed, k));
    const auto& ps = m.params;
    if (preactivation_margin(in.cats, ps.value("V"), ps.value("U")) < margin) continue;
    if (preactivation_margin(in.masks, ps.value("V_m"), ps.value("U_m")) < margin) continue;
    if (antisymmetric_margin(embed_forward(m, in).m) < margin) continue;
    return m;
  }
}

inline Mask filled_rect(std::size_t H, std::size_t W, long x, long y, long w, long h) {
  Mask m(H, W);
  for (long r = std::max(0L, y); r < std::min<long>(long(H), y + h); ++r)
    for (long c = std::max(0L, x); c < std::min<long>(long(W), x + w); ++c)
      m(std::size_t(r), std::size_t(c)) = 1;
  return m;
}

/// Hand-built scene of overlapping rectangles on an H x W canvas, used where
/// generate_scene's size limits are in the way (e.g. 16 x 16 gradient checks).
/// Instances form a chain so every one overlaps its neighbour.
inline Scene small_scene(std::uint64_t seed, std::size_t H = 16, std::size_t W = 16,
                         std::size_t n = 3, std::size_t T = 3, std::size_t S = 2) {
  Rng rng(seed);
  Scene s;
  s.height = H;
  s.width = W;
  s.n_thing_classes = T;
  s.n_stuff_classes = S;
  long cx = long(rng.uniform_int(1, 3)), cy = long(rng.uniform_int(1, 3));
  for (std::size_t i = 0; i < n; ++i) {
    Instance inst;
    inst.category = std::size_t(rng.uniform_int(0, long(T) - 1));
    const long w = rng.uniform_int(long(W) / 3, long(W) / 2 + 1);
    const long h = rng.uniform_int(long(H) / 3, long(H) / 2 + 1);
    const long x = std::clamp(cx, 0L, long(W) - w), y = std::clamp(cy, 0L, long(H) - h);
    inst.amodal = filled_rect(H, W, x, y, w, h);
    inst.box = mask_bbox(inst.amodal);
    cx = x + w / 2 + rng.uniform_int(-1, 1);
    cy = y + h / 3 + rng.uniform_int(-1, 1);
    s.instances.push_back(std::move(inst));
  }
  std::vector<int> ranks(n);
  std::iota(ranks.begin(), ranks.end(), 0);
  rng.shuffle(ranks);
  std::vector<Mask> amodal;
  for (const auto& inst : s.instances) amodal.push_back(inst.amodal);
  auto visible = derive_visible(amodal, ranks);
  for (std::size_t i = 0; i < n; ++i) {
    s.instances[i].depth_rank = ranks[i];
    s.instances[i].visible = std::move(visible[i]);
  }
  s.stuff_map = IdGrid(H, W);
  s.sem_map = IdGrid(H, W);
  s.id_map = IdGrid(H, W);
  for (std::size_t r = 0; r < H; ++r)
    for (std::size_t c = 0; c < W; ++c) {
      const auto band = std::int32_t(r * S / H);
      s.stuff_map(r, c) = band;
      s.sem_map(r, c) = std::int32_t(T) + band;
      s.id_map(r, c) = std::int32_t(n) + band;
    }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = 0; p < H * W; ++p)
      if (s.instances[i].visible[p]) {
        s.sem_map[p] = std::int32_t(s.instances[i].category);
        s.id_map[p] = std::int32_t(i);
      }
  return s;
}

/// Logits following the synth_logits formula, without its image-size limits.
inline LogitPack small_logits(const Scene& s, double alpha, double noise, std::uint64_t seed) {
  Rng rng(seed);
  LogitPack pack;
  pack.patch_logits = Tensor({s.size(), kPatchSize, kPatchSize});
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Tensor p = synth_patch(s.instances[i].amodal, s.instances[i].box, alpha, noise, rng);
    std::copy(p.data().begin(), p.data().end(),
              pack.patch_logits.data().begin() + long(i * p.size()));
  }
  const std::size_t C = s.n_thing_classes + s.n_stuff_classes;
  pack.sem_logits = Tensor({s.height, s.width, C});
  for (std::size_t p = 0; p < s.height * s.width; ++p)
    for (std::size_t k = 0; k < C; ++k)
      pack.sem_logits[p * C + k] =
          alpha * (s.sem_map[p] == std::int32_t(k) ? 1.0 : -1.0) + noise * rng.normal();
  return pack;
}

struct PipelineFixture {
  Scene scene;
  LogitPack logits;
  TrainSample sample;
  EmbedModel model;
};

/// 16 x 16 scene with mild logits so the panoptic loss has live gradients,
/// and a kink-safe model for it.
inline PipelineFixture pipeline_fixture(std::uint64_t seed) {
  for (std::uint64_t k = 0;; ++k) {
    PipelineFixture f;
    f.scene = small_scene(derive_seed(seed, 100 + k));
    f.logits = small_logits(f.scene, 1.5, 0.5, derive_seed(seed, 200 + k));
    f.sample = prepare_sample(f.scene, f.logits, f.scene.n_thing_classes);
    if (f.sample.subset.size() < 2) continue;
    EmbedDims dims;
    dims.n_classes = f.scene.n_thing_classes;
    dims.r_c = dims.r_m = 6;
    dims.d_c = dims.d_m = dims.d_b = 5;
    f.model = kink_safe_model(dims, f.sample.inputs, derive_seed(seed, 300 + k));
    return f;
  }
}

}  // namespace sog::testing
