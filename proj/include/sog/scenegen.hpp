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
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "json.hpp"
#include "sog/grid.hpp"
#include "sog/rng.hpp"
#include "sog/tensor.hpp"

namespace sog {

inline constexpr std::size_t kPatchSize = 28;

enum class ShapeKind { kRectangle, kEllipse };

/// Parameters of the synthetic occlusion world.
struct SceneConfig {
  std::size_t height = 64, width = 64;
  std::size_t n_thing_classes = 4;
  std::size_t n_stuff_classes = 3;
  std::size_t min_instances = 2, max_instances = 6;
  bool rectangles = true;
  bool ellipses = true;
  // Box side length as a fraction of the image side.
  double size_min = 0.25, size_max = 0.55;
  // 0: centers uniform over the image; 1: centers clustered near the middle.
  double overlap_bias = 0.7;
  // Depth key is log(box area) + class_depth_weight * class; smaller keys are nearer.
  double class_depth_weight = 0.0;
  double logit_alpha = 4.0;
  double logit_noise = 1.0;
  double box_jitter = 0.05;
  double class_flip = 0.05;
  double score_noise = 0.5;
  // Expected fraction of instance pairs whose score order contradicts depth.
  double contradiction_rate = 0.3;

  std::size_t n_classes() const { return n_thing_classes + n_stuff_classes; }

  void validate() const {
    require(height >= 32 && width >= 32, "SceneConfig: H and W must be >= 32");
    require(n_thing_classes >= 1 && n_stuff_classes >= 1,
            "SceneConfig: class counts must be >= 1");
    require(min_instances >= 1, "SceneConfig: min_instances must be >= 1");
    require(max_instances >= min_instances, "SceneConfig: max_instances < min_instances");
    require(rectangles || ellipses, "SceneConfig: no shape kind enabled");
    require(overlap_bias >= 0.0 && overlap_bias <= 1.0, "SceneConfig: overlap_bias outside [0,1]");
    require(logit_noise >= 0.0, "SceneConfig: logit_noise must be >= 0");
    require(box_jitter >= 0.0 && class_flip >= 0.0 && class_flip <= 1.0 && score_noise >= 0.0,
            "SceneConfig: invalid detection jitter");
    require(contradiction_rate >= 0.0 && contradiction_rate <= 0.5,
            "SceneConfig: contradiction_rate must lie in [0, 0.5]");
    const double side = double(std::min(height, width));
    if (!(size_min > 0.0) || size_max < size_min || size_max > 1.0 ||
        std::lround(size_min * side) < 1)
      throw ConfigError("SceneConfig: size range [" + std::to_string(size_min) + ", " +
                        std::to_string(size_max) + "] cannot fit a shape in the image");
  }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SceneConfig, height, width, n_thing_classes,
                                                n_stuff_classes, min_instances, max_instances,
                                                rectangles, ellipses, size_min, size_max,
                                                overlap_bias, class_depth_weight, logit_alpha,
                                                logit_noise, box_jitter, class_flip, score_noise,
                                                contradiction_rate)

inline Tensor one_hot(std::size_t cls, std::size_t n) {
  require(cls < n, "one_hot: class id " + std::to_string(cls) + " out of range");
  Tensor t({n});
  t[cls] = 1.0;
  return t;
}

struct Instance {
  Box box;
  std::size_t category = 0;
  ShapeKind shape = ShapeKind::kRectangle;
  Mask amodal;
  Mask visible;
  int depth_rank = 0;  // 0 is nearest
  double score = 1.0;
};

/// Panoptic channel layout: 0..N-1 are instances, N..N+S-1 stuff classes.
/// Semantic layout: 0..T-1 thing classes, T..T+S-1 stuff classes.
struct Scene {
  std::size_t height = 0, width = 0;
  std::size_t n_thing_classes = 0, n_stuff_classes = 0;
  std::vector<Instance> instances;
  IdGrid stuff_map;
  IdGrid sem_map;
  IdGrid id_map;

  std::size_t size() const { return instances.size(); }
};

struct LogitPack {
  Tensor patch_logits;  // N x 28 x 28
  Tensor sem_logits;    // H x W x (T + S)
};

struct DetectedInstance {
  Box box;
  std::size_t class_id = 0;
  double score = 1.0;
  Tensor patch_logits{{kPatchSize, kPatchSize}};
};

/// visible_i = amodal_i minus the union of amodal masks with a smaller rank.
inline std::vector<Mask> derive_visible(const std::vector<Mask>& amodal,
                                        const std::vector<int>& ranks) {
  require(amodal.size() == ranks.size(), "derive_visible: masks and ranks differ in length");
  {
    auto sorted = ranks;
    std::sort(sorted.begin(), sorted.end());
    require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(),
            "derive_visible: duplicate depth ranks");
  }
  std::vector<std::size_t> order(amodal.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return ranks[a] < ranks[b]; });

  std::vector<Mask> visible(amodal.size());
  if (amodal.empty()) return visible;
  Mask claimed(amodal[0].height(), amodal[0].width());
  for (auto i : order) {
    require(amodal[i].height() == claimed.height() && amodal[i].width() == claimed.width(),
            "derive_visible: mask size mismatch");
    Mask v(claimed.height(), claimed.width());
    for (std::size_t p = 0; p < v.size(); ++p) {
      v[p] = amodal[i][p] && !claimed[p];
      claimed[p] = claimed[p] || amodal[i][p];
    }
    visible[i] = std::move(v);
  }
  return visible;
}

namespace detail {

inline Mask draw_shape(std::size_t H, std::size_t W, ShapeKind kind, long x0, long y0, long w,
                       long h) {
  Mask m(H, W);
  const double cx = x0 + (w - 1) / 2.0, cy = y0 + (h - 1) / 2.0;
  const double rx = w / 2.0, ry = h / 2.0;
  for (long r = y0; r < y0 + h; ++r)
    for (long c = x0; c < x0 + w; ++c) {
      if (kind == ShapeKind::kEllipse) {
        const double dx = (c - cx) / rx, dy = (r - cy) / ry;
        if (dx * dx + dy * dy > 1.0) continue;
      }
      m(std::size_t(r), std::size_t(c)) = 1;
    }
  return m;
}

inline long draw_extent(Rng& rng, const SceneConfig& cfg, std::size_t side) {
  const long lo = std::max(1L, std::lround(cfg.size_min * double(side)));
  const long hi = std::max(lo, std::lround(cfg.size_max * double(side)));
  return std::min<long>(rng.uniform_int(lo, hi), long(side));
}

inline long draw_origin(Rng& rng, const SceneConfig& cfg, std::size_t side, long extent) {
  const double free_center = rng.uniform(extent / 2.0, double(side) - extent / 2.0);
  const double clustered = double(side) / 2.0 + rng.uniform(-0.15, 0.15) * double(side);
  const double center = (1.0 - cfg.overlap_bias) * free_center + cfg.overlap_bias * clustered;
  return std::clamp(std::lround(center - extent / 2.0), 0L, long(side) - extent);
}

}  // namespace detail

// Depth ranks: position in ascending order of the depth key, ties by index.
inline std::vector<int> depth_ranks(const std::vector<Instance>& inst, double class_weight) {
  std::vector<double> key(inst.size());
  for (std::size_t i = 0; i < inst.size(); ++i)
    key[i] = std::log(inst[i].box.w * inst[i].box.h) + class_weight * double(inst[i].category);
  std::vector<std::size_t> order(inst.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return key[a] < key[b]; });
  std::vector<int> ranks(inst.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) ranks[order[pos]] = int(pos);
  return ranks;
}

inline Scene generate_scene(const SceneConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  Scene s;
  s.height = cfg.height;
  s.width = cfg.width;
  s.n_thing_classes = cfg.n_thing_classes;
  s.n_stuff_classes = cfg.n_stuff_classes;

  const auto n = static_cast<std::size_t>(
      rng.uniform_int(long(cfg.min_instances), long(cfg.max_instances)));
  for (std::size_t i = 0; i < n; ++i) {
    Instance inst;
    inst.category = static_cast<std::size_t>(rng.uniform_int(0, long(cfg.n_thing_classes) - 1));
    if (cfg.rectangles && cfg.ellipses)
      inst.shape = rng.bernoulli(0.5) ? ShapeKind::kEllipse : ShapeKind::kRectangle;
    else
      inst.shape = cfg.ellipses ? ShapeKind::kEllipse : ShapeKind::kRectangle;
    const long w = detail::draw_extent(rng, cfg, cfg.width);
    const long h = detail::draw_extent(rng, cfg, cfg.height);
    const long x0 = detail::draw_origin(rng, cfg, cfg.width, w);
    const long y0 = detail::draw_origin(rng, cfg, cfg.height, h);
    inst.amodal = detail::draw_shape(cfg.height, cfg.width, inst.shape, x0, y0, w, h);
    inst.box = mask_bbox(inst.amodal);
    s.instances.push_back(std::move(inst));
  }

  const auto ranks = depth_ranks(s.instances, cfg.class_depth_weight);
  std::vector<Mask> amodal;
  for (auto& inst : s.instances) amodal.push_back(inst.amodal);
  auto visible = derive_visible(amodal, ranks);
  for (std::size_t i = 0; i < n; ++i) {
    s.instances[i].depth_rank = ranks[i];
    s.instances[i].visible = std::move(visible[i]);
  }

  // Stuff: horizontal bands, one per stuff class.
  s.stuff_map = IdGrid(cfg.height, cfg.width);
  s.sem_map = IdGrid(cfg.height, cfg.width);
  s.id_map = IdGrid(cfg.height, cfg.width);
  const auto T = std::int32_t(cfg.n_thing_classes);
  for (std::size_t r = 0; r < cfg.height; ++r) {
    const auto band = std::int32_t(r * cfg.n_stuff_classes / cfg.height);
    for (std::size_t c = 0; c < cfg.width; ++c) {
      s.stuff_map(r, c) = band;
      s.sem_map(r, c) = T + band;
      s.id_map(r, c) = std::int32_t(n) + band;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& v = s.instances[i].visible;
    for (std::size_t p = 0; p < v.size(); ++p)
      if (v[p]) {
        s.sem_map[p] = std::int32_t(s.instances[i].category);
        s.id_map[p] = std::int32_t(i);
      }
  }
  return s;
}

inline Tensor synth_patch(const Mask& amodal, const Box& box, double alpha, double noise,
                          Rng& rng) {
  Tensor m = resample_box(amodal, box, kPatchSize, kPatchSize);
  for (std::size_t k = 0; k < m.size(); ++k)
    m[k] = alpha * (2.0 * m[k] - 1.0) + noise * rng.normal();
  return m;
}

/// Noisy stand-ins for the mask head (box-local) and the semantic head.
inline LogitPack synth_logits(const Scene& scene, const SceneConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  const std::size_t n = scene.size();
  LogitPack pack;
  pack.patch_logits = Tensor({n, kPatchSize, kPatchSize});
  for (std::size_t i = 0; i < n; ++i) {
    const auto& inst = scene.instances[i];
    Tensor p = synth_patch(inst.amodal, inst.box, cfg.logit_alpha, cfg.logit_noise, rng);
    std::copy(p.data().begin(), p.data().end(),
              pack.patch_logits.data().begin() + long(i * p.size()));
  }
  const std::size_t C = scene.n_thing_classes + scene.n_stuff_classes;
  pack.sem_logits = Tensor({scene.height, scene.width, C});
  for (std::size_t r = 0; r < scene.height; ++r)
    for (std::size_t c = 0; c < scene.width; ++c)
      for (std::size_t k = 0; k < C; ++k) {
        const double on = scene.sem_map(r, c) == std::int32_t(k) ? 1.0 : -1.0;
        pack.sem_logits.at(r, c, k) = cfg.logit_alpha * on + cfg.logit_noise * rng.normal();
      }
  return pack;
}

/// Detector stand-in: jittered boxes, occasional class flips, and scores that
/// follow depth order only in part of the scenes. In a scene chosen with
/// probability 2q the score order is a uniform shuffle, so a given pair is
/// mis-ordered with probability q overall.
inline std::vector<DetectedInstance> perturb_detections(const Scene& scene,
                                                        const SceneConfig& cfg,
                                                        std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  const std::size_t n = scene.size();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) {
    return scene.instances[a].depth_rank < scene.instances[b].depth_rank;
  });
  const bool scramble = rng.bernoulli(2.0 * cfg.contradiction_rate);
  if (scramble) rng.shuffle(order);
  std::vector<std::size_t> position(n);
  for (std::size_t p = 0; p < n; ++p) position[order[p]] = p;

  std::vector<DetectedInstance> dets(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& inst = scene.instances[i];
    auto& d = dets[i];
    const double u = rng.uniform();
    d.score = std::clamp(1.0 - cfg.score_noise * (double(position[i]) + 0.5 * u) / double(n),
                         1e-3, 1.0);

    const double jx = rng.normal(), jy = rng.normal(), jw = rng.normal(), jh = rng.normal();
    Box b = inst.box;
    b.w = std::max(1.0, inst.box.w * std::exp(cfg.box_jitter * jw));
    b.h = std::max(1.0, inst.box.h * std::exp(cfg.box_jitter * jh));
    b.x = std::clamp(inst.box.x + cfg.box_jitter * inst.box.w * jx, -b.w / 2.0,
                     double(scene.width) - b.w / 2.0);
    b.y = std::clamp(inst.box.y + cfg.box_jitter * inst.box.h * jy, -b.h / 2.0,
                     double(scene.height) - b.h / 2.0);
    d.box = b;

    const bool flip = rng.bernoulli(cfg.class_flip);
    const auto shift = cfg.n_thing_classes > 1
                           ? std::size_t(rng.uniform_int(1, long(cfg.n_thing_classes) - 1))
                           : std::size_t{0};
    d.class_id = flip ? (inst.category + shift) % cfg.n_thing_classes : inst.category;

    d.patch_logits = synth_patch(inst.amodal, d.box, cfg.logit_alpha, cfg.logit_noise, rng);
  }
  return dets;
}

}  // namespace sog
