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
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "sog/metrics.hpp"
#include "sog/panohead.hpp"
#include "sog/relations.hpp"
#include "sog/relembed.hpp"
#include "sog/resolver.hpp"
#include "sog/scenegen.hpp"

namespace sog {

struct FusionConfig {
  double p_min = 0.5;
  double nms_threshold = 0.5;  // same-class intersection over the smaller mask
  std::size_t min_stuff_area = 16;
  // (above_class, below_class): the first class always covers the second.
  std::vector<std::pair<std::size_t, std::size_t>> priors;
  HeadVariant head = HeadVariant::kPH2;
  double k = 2.0;

  void validate(std::size_t n_thing) const {
    require(p_min >= 0.0 && p_min < 1.0, "FusionConfig: p_min must lie in [0,1)");
    require(nms_threshold > 0.0 && nms_threshold < 1.0,
            "FusionConfig: nms threshold must lie in (0,1)");
    for (const auto& [a, b] : priors)
      require(a < n_thing && b < n_thing && a != b,
              "FusionConfig: label prior references an invalid class pair");
  }
};

/// Image-level context shared by all fusion pipelines.
struct FusionInput {
  std::size_t height = 0, width = 0;
  std::size_t n_thing = 0, n_stuff = 0;
  const Tensor* sem_logits = nullptr;  // H x W x (T + S)
};

inline FusionInput fusion_input(const Scene& scene, const LogitPack& logits) {
  return {scene.height, scene.width, scene.n_thing_classes, scene.n_stuff_classes,
          &logits.sem_logits};
}

inline std::vector<DetectedInstance> confidence_filter(const std::vector<DetectedInstance>& dets,
                                                       double p_min) {
  std::vector<DetectedInstance> out;
  for (const auto& d : dets)
    if (d.score >= p_min) out.push_back(d);
  return out;
}

// Region where the pasted logit is >= 0, i.e. sigmoid >= 0.5.
inline Mask detection_mask(const DetectedInstance& d, std::size_t H, std::size_t W) {
  const Tensor a = paste_patch(d.patch_logits, d.box, H, W);
  Mask m(H, W);
  for (std::size_t p = 0; p < m.size(); ++p) m[p] = a[p] >= 0.0;
  return m;
}

// Indices sorted by descending score; ties keep detection order.
inline std::vector<std::size_t> score_order(const std::vector<DetectedInstance>& dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return dets[a].score > dets[b].score; });
  return order;
}

struct MaskedDetection {
  DetectedInstance det;
  Mask mask;          // after removing pixels claimed by higher-scored same-class masks
  Mask full_mask;     // binarized pasted logits
  std::size_t source = 0;  // index into the input sequence
};

/// Same-class suppression in descending score order. A detection whose
/// intersection with a kept higher-scored same-class mask exceeds `threshold`
/// of the smaller mask is dropped; otherwise it gives up the shared pixels.
/// Survivors are returned in input order.
inline std::vector<MaskedDetection> nms_like(const std::vector<DetectedInstance>& dets,
                                             double threshold, std::size_t H, std::size_t W) {
  std::vector<MaskedDetection> all(dets.size());
  for (std::size_t i = 0; i < dets.size(); ++i) {
    all[i].det = dets[i];
    all[i].full_mask = detection_mask(dets[i], H, W);
    all[i].mask = all[i].full_mask;
    all[i].source = i;
  }
  std::vector<bool> keep(dets.size(), false);
  std::vector<std::size_t> kept_so_far;
  for (auto cur : score_order(dets)) {
    bool drop = false;
    for (auto prev : kept_so_far) {
      if (all[prev].det.class_id != all[cur].det.class_id) continue;
      const auto inter = intersection_area(all[cur].mask, all[prev].mask);
      if (inter == 0) continue;
      const auto smaller = std::min(area(all[cur].mask), area(all[prev].mask));
      if (double(inter) / double(smaller) > threshold) {
        drop = true;
        break;
      }
      for (std::size_t p = 0; p < all[cur].mask.size(); ++p)
        if (all[prev].mask[p]) all[cur].mask[p] = 0;
    }
    if (!drop) {
      keep[cur] = true;
      kept_so_far.push_back(cur);
    }
  }
  std::vector<MaskedDetection> out;
  for (std::size_t i = 0; i < dets.size(); ++i)
    if (keep[i]) out.push_back(std::move(all[i]));
  return out;
}

/// Turns a per-pixel channel map (instances 0..n-1, stuff n..n+S-1) into a
/// PanopticMap. Stuff segments smaller than `min_stuff_area` become void.
inline PanopticMap panoptic_from_channels(const IdGrid& channels,
                                          const std::vector<std::size_t>& inst_classes,
                                          std::size_t n_thing, std::size_t n_stuff,
                                          std::size_t min_stuff_area) {
  const auto n = std::int32_t(inst_classes.size());
  std::vector<std::size_t> stuff_area(n_stuff, 0);
  for (auto c : channels.values())
    if (c >= n && c != kVoidId) ++stuff_area.at(std::size_t(c - n));

  PanopticMap pm;
  pm.ids = IdGrid(channels.height(), channels.width(), kVoidSegment);
  for (std::size_t p = 0; p < channels.size(); ++p) {
    const auto c = channels[p];
    if (c == kVoidId) continue;
    if (c < n) {
      pm.ids[p] = c + 1;
      pm.segments[c + 1] = {std::int32_t(inst_classes[std::size_t(c)]), true};
    } else {
      const auto s = std::size_t(c - n);
      if (stuff_area[s] < min_stuff_area) continue;
      pm.ids[p] = c + 1;
      pm.segments[c + 1] = {std::int32_t(n_thing + s), false};
    }
  }
  return pm;
}

/// Ground-truth panoptic map of a scene: one segment per visible instance and
/// one per stuff class.
inline PanopticMap scene_panoptic(const Scene& scene) {
  std::vector<std::size_t> classes;
  for (const auto& inst : scene.instances) classes.push_back(inst.category);
  return panoptic_from_channels(scene.id_map, classes, scene.n_thing_classes,
                                scene.n_stuff_classes, 0);
}

namespace detail {

inline std::size_t stuff_argmax(const Tensor& sem, std::size_t p, std::size_t n_thing,
                                std::size_t n_stuff) {
  const std::size_t C = sem.dim(2);
  std::size_t best = 0;
  for (std::size_t s = 1; s < n_stuff; ++s)
    if (sem[p * C + n_thing + s] > sem[p * C + n_thing + best]) best = s;
  return best;
}

// Paints masks by precedence; unclaimed pixels fall back to the stuff argmax.
template <typename Above>
PanopticMap paint_fuse(const std::vector<MaskedDetection>& kept, const FusionInput& in,
                       const FusionConfig& cfg, Above&& above) {
  const std::size_t n = kept.size();
  IdGrid channels(in.height, in.width, kVoidId);
  std::vector<DetectedInstance> dets;
  for (const auto& k : kept) dets.push_back(k.det);
  const auto order = score_order(dets);
  for (std::size_t p = 0; p < channels.size(); ++p) {
    std::optional<std::size_t> champ;
    for (auto i : order) {
      if (!kept[i].mask[p]) continue;
      if (!champ || above(kept[i].det, kept[*champ].det)) champ = i;
    }
    channels[p] = champ ? std::int32_t(*champ)
                        : std::int32_t(n + stuff_argmax(*in.sem_logits, p, in.n_thing,
                                                        in.n_stuff));
  }
  std::vector<std::size_t> classes;
  for (const auto& k : kept) classes.push_back(k.det.class_id);
  return panoptic_from_channels(channels, classes, in.n_thing, in.n_stuff, cfg.min_stuff_area);
}

}  // namespace detail

/// Score-sorted painting: higher-scored masks claim contested pixels.
inline PanopticMap heuristic_fuse(const std::vector<DetectedInstance>& dets,
                                  const FusionInput& in, const FusionConfig& cfg) {
  cfg.validate(in.n_thing);
  const auto kept = nms_like(confidence_filter(dets, cfg.p_min), cfg.nms_threshold, in.height,
                             in.width);
  // Candidates arrive in score order, so the first one seen always wins.
  return detail::paint_fuse(kept, in, cfg, [](const auto&, const auto&) { return false; });
}

/// Score-sorted painting where listed class pairs override the score order.
inline PanopticMap prior_fuse(const std::vector<DetectedInstance>& dets, const FusionInput& in,
                              const FusionConfig& cfg) {
  cfg.validate(in.n_thing);
  const auto kept = nms_like(confidence_filter(dets, cfg.p_min), cfg.nms_threshold, in.height,
                             in.width);
  auto listed = [&](std::size_t a, std::size_t b) {
    return std::find(cfg.priors.begin(), cfg.priors.end(), std::pair{a, b}) != cfg.priors.end();
  };
  return detail::paint_fuse(kept, in, cfg, [&](const DetectedInstance& cand,
                                               const DetectedInstance& champ) {
    return listed(cand.class_id, champ.class_id) && !listed(champ.class_id, cand.class_id);
  });
}

/// Relational embedding inputs restricted to instances that overlap another;
/// the returned O is N x N with zero rows/cols for the others.
struct FilteredEmbedding {
  std::vector<std::size_t> subset;
  EmbedInputs inputs;
  EmbedTrace trace;
  Tensor o;  // N x N
};

inline FilteredEmbedding embed_filtered(const EmbedModel& model, const std::vector<Box>& boxes,
                                        const std::vector<std::size_t>& classes,
                                        const std::vector<Mask>& masks) {
  const std::size_t n = boxes.size();
  FilteredEmbedding fe;
  fe.o = Tensor({n, n});
  if (n < 2) return fe;
  fe.subset = filter_overlapping(sym_relation(masks));
  if (fe.subset.size() < 2) return fe;
  std::vector<Box> b;
  std::vector<std::size_t> c;
  std::vector<const Mask*> m;
  for (auto i : fe.subset) {
    b.push_back(boxes[i]);
    c.push_back(classes[i]);
    m.push_back(&masks[i]);
  }
  fe.inputs = make_embed_inputs(b, c, m, model.dims.n_classes);
  fe.trace = embed_forward(model, fe.inputs);
  fe.o = scatter_square(fe.trace.o, fe.subset, n);
  return fe;
}

/// Paste -> resolve -> combine -> assemble -> argmax, for a fixed O.
inline PanopticMap sog_fuse_with_overlap(const std::vector<MaskedDetection>& kept,
                                         const Tensor& o, const FusionInput& in,
                                         const FusionConfig& cfg) {
  const std::size_t n = kept.size(), H = in.height, W = in.width;
  const Tensor& sem = *in.sem_logits;
  Tensor a({H, W, n});
  for (std::size_t i = 0; i < n; ++i)
    set_channel(a, i, paste_patch(kept[i].det.patch_logits, kept[i].det.box, H, W));
  const Tensor resolved = resolve(a, o);
  Tensor z({H, W, n});
  for (std::size_t i = 0; i < n; ++i) {
    const Tensor x = extract_sem_logit(sem, kept[i].det.box, kept[i].det.class_id);
    set_channel(z, i, combine(cfg.head, cfg.k, x, get_channel(resolved, i)));
  }
  Tensor stuff({H, W, in.n_stuff});
  for (std::size_t p = 0; p < H * W; ++p)
    for (std::size_t s = 0; s < in.n_stuff; ++s)
      stuff[p * in.n_stuff + s] = sem[p * sem.dim(2) + in.n_thing + s];
  const IdGrid channels = infer_ids(assemble(z, stuff));
  std::vector<std::size_t> classes;
  for (const auto& k : kept) classes.push_back(k.det.class_id);
  return panoptic_from_channels(channels, classes, in.n_thing, in.n_stuff, cfg.min_stuff_area);
}

struct SogResult {
  PanopticMap map;
  std::vector<MaskedDetection> kept;
  Tensor o;
};

/// Full inference: filter, suppress, embed the survivors, resolve their
/// overlaps, and classify every pixel with the panoptic head.
inline SogResult sog_infer_detailed(const std::vector<DetectedInstance>& dets,
                                    const FusionInput& in, const EmbedModel& model,
                                    const FusionConfig& cfg,
                                    const std::optional<Tensor>& overlap_override = {}) {
  cfg.validate(in.n_thing);
  SogResult res;
  res.kept = nms_like(confidence_filter(dets, cfg.p_min), cfg.nms_threshold, in.height,
                      in.width);
  const std::size_t n = res.kept.size();
  if (overlap_override) {
    require(overlap_override->shape() == Shape{n, n}, "sog_infer: overlap override must be N x N");
    res.o = *overlap_override;
  } else {
    std::vector<Box> boxes;
    std::vector<std::size_t> classes;
    std::vector<Mask> masks;
    for (const auto& k : res.kept) {
      boxes.push_back(k.det.box);
      classes.push_back(k.det.class_id);
      masks.push_back(k.full_mask);
    }
    res.o = embed_filtered(model, boxes, classes, masks).o;
  }
  res.map = sog_fuse_with_overlap(res.kept, res.o, in, cfg);
  return res;
}

inline PanopticMap sog_infer(const std::vector<DetectedInstance>& dets, const FusionInput& in,
                             const EmbedModel& model, const FusionConfig& cfg) {
  return sog_infer_detailed(dets, in, model, cfg).map;
}

}  // namespace sog
