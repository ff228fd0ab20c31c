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

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "sog/dataset.hpp"
#include "sog/fusion.hpp"
#include "sog/gradcheck.hpp"
#include "sog/metrics.hpp"
#include "sog/panohead.hpp"
#include "sog/params.hpp"
#include "sog/relations.hpp"
#include "sog/relembed.hpp"
#include "sog/resolver.hpp"

namespace sog {

enum class Supervision { kPanopticOnly, kRelation, kWeakRelation };

inline Supervision parse_supervision(const std::string& s) {
  if (s == "panoptic_only") return Supervision::kPanopticOnly;
  if (s == "panoptic+lr") return Supervision::kRelation;
  if (s == "panoptic+lrstar") return Supervision::kWeakRelation;
  throw ConfigError("unknown supervision mode: " + s);
}

inline std::string to_string(Supervision s) {
  switch (s) {
    case Supervision::kPanopticOnly: return "panoptic_only";
    case Supervision::kRelation: return "panoptic+lr";
    case Supervision::kWeakRelation: return "panoptic+lrstar";
  }
  return "?";
}

struct TrainConfig {
  std::size_t epochs = 30;
  double lr = 0.01;
  double decay_factor = 0.1;
  // Epochs (0-based) at whose start the learning rate is multiplied by
  // decay_factor. Empty means a single decay at 2/3 of the run.
  std::vector<std::size_t> decay_epochs;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double lambda_pan = 0.1;
  double lambda_rel = 1.0;
  // Per-step bound on the joint gradient norm; 0 disables clipping.
  double grad_clip = 0.0;
  Supervision mode = Supervision::kRelation;
  HeadVariant head = HeadVariant::kPH2;
  double k = 2.0;
  std::size_t batch_size = 1;
  std::uint64_t seed = 0;
  EmbedDims dims;
  // Evaluate PQ every this many epochs (and always after the last); 0 = only last.
  std::size_t pq_every = 0;

  void validate() const {
    require(epochs >= 1, "TrainConfig: epochs must be >= 1");
    require(lambda_pan >= 0.0 && lambda_rel >= 0.0, "TrainConfig: loss weights must be >= 0");
    require(lr >= 0.0, "TrainConfig: lr must be >= 0");
    require(grad_clip >= 0.0, "TrainConfig: grad_clip must be >= 0");
    require(batch_size >= 1, "TrainConfig: batch_size must be >= 1");
  }

  double lr_at(std::size_t epoch) const {
    std::vector<std::size_t> steps = decay_epochs;
    if (steps.empty()) steps.push_back((2 * epochs + 2) / 3);
    double v = lr;
    for (auto s : steps)
      if (epoch >= s) v *= decay_factor;
    return v;
  }
};

/// Per-scene tensors that stay fixed during training: pasted ground-truth
/// box logits, extracted semantic logits, stuff logits and relation targets.
struct TrainSample {
  std::size_t n = 0;
  Tensor a;      // H x W x N
  Tensor x;      // H x W x N
  Tensor stuff;  // H x W x S
  IdGrid target;
  std::vector<std::size_t> subset;
  EmbedInputs inputs;
  Tensor r_sub, rstar_sub;
};

inline TrainSample prepare_sample(const Scene& scene, const LogitPack& logits,
                                  std::size_t n_classes) {
  TrainSample s;
  const std::size_t n = scene.size(), H = scene.height, W = scene.width;
  const std::size_t T = scene.n_thing_classes, S = scene.n_stuff_classes;
  s.n = n;
  s.a = Tensor({H, W, n});
  s.x = Tensor({H, W, n});
  for (std::size_t i = 0; i < n; ++i) {
    const auto& inst = scene.instances[i];
    Tensor patch({kPatchSize, kPatchSize});
    std::copy_n(logits.patch_logits.data().begin() + long(i * patch.size()), patch.size(),
                patch.data().begin());
    set_channel(s.a, i, paste_patch(patch, inst.box, H, W));
    set_channel(s.x, i, extract_sem_logit(logits.sem_logits, inst.box, inst.category));
  }
  s.stuff = Tensor({H, W, S});
  for (std::size_t p = 0; p < H * W; ++p)
    for (std::size_t k = 0; k < S; ++k) s.stuff[p * S + k] = logits.sem_logits[p * (T + S) + T + k];
  s.target = scene.id_map;

  std::vector<Mask> amodal, visible;
  for (const auto& inst : scene.instances) {
    amodal.push_back(inst.amodal);
    visible.push_back(inst.visible);
  }
  const Tensor r = sym_relation(amodal);
  s.subset = filter_overlapping(r);
  if (s.subset.size() >= 2) {
    std::vector<Box> b;
    std::vector<std::size_t> c;
    std::vector<const Mask*> m;
    for (auto i : s.subset) {
      b.push_back(scene.instances[i].box);
      c.push_back(scene.instances[i].category);
      m.push_back(&scene.instances[i].amodal);
    }
    s.inputs = make_embed_inputs(b, c, m, n_classes);
    s.r_sub = select_square(r, s.subset);
    s.rstar_sub = select_square(approx_overlap_gt(amodal, visible), s.subset);
  }
  return s;
}

struct StepLosses {
  double total = 0.0, panoptic = 0.0, relation = 0.0;
  bool has_relation = false;
};

struct LossOptions {
  Supervision mode = Supervision::kRelation;
  HeadVariant head = HeadVariant::kPH2;
  double k = 2.0;
  double lambda_pan = 0.1;
  double lambda_rel = 1.0;
};

inline LossOptions loss_options(const TrainConfig& cfg) {
  return {cfg.mode, cfg.head, cfg.k, cfg.lambda_pan, cfg.lambda_rel};
}

/// Forward pass of the whole training objective for one scene. When
/// `backward` is set, dTotal/dparams is accumulated into model.params.
inline StepLosses scene_objective(EmbedModel& model, const TrainSample& s,
                                  const LossOptions& opt, bool backward) {
  StepLosses out;
  const bool embedded = s.subset.size() >= 2;
  EmbedTrace trace;
  Tensor o({s.n, s.n});
  if (embedded) {
    trace = embed_forward(model, s.inputs);
    o = scatter_square(trace.o, s.subset, s.n);
  }

  const Tensor resolved = resolve(s.a, o);
  const Tensor z = s.n ? combine(opt.head, opt.k, s.x, resolved) : resolved;
  const auto ce = panoptic_ce_loss_with_grad(assemble(z, s.stuff), s.target);
  out.panoptic = ce.loss;

  Tensor grad_o_sub;
  if (embedded && opt.mode != Supervision::kPanopticOnly) {
    const auto rl = opt.mode == Supervision::kRelation ? relation_loss(trace.o, s.r_sub)
                                                       : weak_relation_loss(trace.o, s.rstar_sub);
    out.relation = rl.loss;
    out.has_relation = true;
    grad_o_sub = rl.grad;
    for (auto& g : grad_o_sub.data()) g *= opt.lambda_rel;
  }
  out.total = opt.lambda_pan * out.panoptic + opt.lambda_rel * out.relation;
  if (!std::isfinite(out.total)) throw NumericError("non-finite training loss");

  if (backward && embedded) {
    const Tensor gz = assemble_vjp_inst(ce.grad, s.n);
    const Tensor ga = combine_vjp_a(opt.head, opt.k, s.x, resolved, gz);
    const Tensor go = resolve_vjp(s.a, o, ga).o;
    Tensor g = select_square(go, s.subset);
    for (auto& v : g.data()) v *= opt.lambda_pan;
    if (grad_o_sub.size()) axpy(g, grad_o_sub);
    embed_backward(model, s.inputs, trace, g);
  }
  return out;
}

// ---------------------------------------------------------------------------

/// O for a scene's ground-truth instances, computed the way training sees it.
inline Tensor scene_overlap(const EmbedModel& model, const Scene& scene) {
  std::vector<Box> boxes;
  std::vector<std::size_t> classes;
  std::vector<Mask> masks;
  for (const auto& inst : scene.instances) {
    boxes.push_back(inst.box);
    classes.push_back(inst.category);
    masks.push_back(inst.amodal);
  }
  return embed_filtered(model, boxes, classes, masks).o;
}

inline Tensor scene_rstar(const Scene& scene) {
  std::vector<Mask> amodal, visible;
  for (const auto& inst : scene.instances) {
    amodal.push_back(inst.amodal);
    visible.push_back(inst.visible);
  }
  return approx_overlap_gt(amodal, visible);
}

struct EvalReport {
  double mean_oa = 0.0;
  std::size_t oa_scenes = 0;
  PQReport pq_sog, pq_heuristic, pq_prior;
};

struct EvalOptions {
  FusionConfig fusion;
  bool with_pq = true;
  std::size_t jobs = 1;
};

using OverlapFn = std::function<Tensor(const Scene&)>;

/// Mean OA over scenes with at least two instances.
inline std::pair<double, std::size_t> evaluate_oa(const std::vector<SceneRecord>& data,
                                                  const OverlapFn& overlap, std::size_t jobs) {
  std::vector<std::optional<double>> per(data.size());
  parallel_for(data.size(), jobs, [&](std::size_t i) {
    const auto& sc = data[i].scene;
    if (sc.size() < 2) return;
    per[i] = overlap_accuracy(overlap(sc), scene_rstar(sc));
  });
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& v : per)
    if (v) {
      sum += *v;
      ++count;
    }
  return {count ? sum / double(count) : 0.0, count};
}

inline EvalReport evaluate(const std::vector<SceneRecord>& data, const EmbedModel& model,
                           const EvalOptions& opt) {
  require(!data.empty(), "evaluate: empty dataset");
  EvalReport rep;
  std::tie(rep.mean_oa, rep.oa_scenes) = evaluate_oa(
      data, [&](const Scene& s) { return scene_overlap(model, s); }, opt.jobs);
  if (!opt.with_pq) return rep;
  struct PerScene {
    PQReport sog, heur, prior;
  };
  std::vector<PerScene> per(data.size());
  parallel_for(data.size(), opt.jobs, [&](std::size_t i) {
    const auto& rec = data[i];
    const auto in = fusion_input(rec.scene, rec.logits);
    const auto gt = scene_panoptic(rec.scene);
    per[i].sog = panoptic_quality(sog_infer(rec.detections, in, model, opt.fusion), gt);
    per[i].heur = panoptic_quality(heuristic_fuse(rec.detections, in, opt.fusion), gt);
    per[i].prior = panoptic_quality(prior_fuse(rec.detections, in, opt.fusion), gt);
  });
  for (const auto& p : per) {
    rep.pq_sog.merge(p.sog);
    rep.pq_heuristic.merge(p.heur);
    rep.pq_prior.merge(p.prior);
  }
  return rep;
}

// ---------------------------------------------------------------------------

struct EpochStats {
  std::size_t epoch = 0;
  double lr = 0.0;
  double mean_total = 0.0;
  double mean_panoptic = 0.0;
  double mean_relation = 0.0;
  std::optional<double> eval_oa;
  std::optional<double> eval_pq;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  double wall_seconds = 0.0;
};

struct TrainHooks {
  const std::vector<SceneRecord>* eval_data = nullptr;
  FusionConfig fusion;
  std::size_t eval_jobs = 1;
  std::function<void(std::size_t epoch, const EmbedModel&)> on_epoch;
  std::ostream* log = nullptr;
};

struct TrainResult {
  EmbedModel model;
  TrainReport report;
};

namespace detail {
// One optimizer step; an overflowing update is a numeric failure, not a model.
inline void update(ParamStore& ps, double grad_clip, const SgdOptions& sgd) {
  clip_grad_norm(ps, grad_clip);
  sgd_step(ps, sgd);
  for (const auto& e : ps.entries())
    if (!e.value.all_finite()) throw NumericError("non-finite parameter " + e.name + " after update");
}
}  // namespace detail

inline TrainResult train(const std::vector<SceneRecord>& data, const TrainConfig& cfg,
                         const TrainHooks& hooks = {}) {
  cfg.validate();
  require(!data.empty(), "train: empty dataset");
  const auto t0 = std::chrono::steady_clock::now();

  EmbedDims dims = cfg.dims;
  dims.n_classes = data.front().scene.n_thing_classes;
  TrainResult res{EmbedModel::create(dims, derive_seed(cfg.seed, 0xE3B)), {}};

  std::vector<TrainSample> samples;
  samples.reserve(data.size());
  std::size_t relational = 0;
  for (const auto& rec : data) {
    samples.push_back(prepare_sample(rec.scene, rec.logits, dims.n_classes));
    relational += samples.back().subset.size() >= 2;
  }
  LossOptions opt = loss_options(cfg);
  if (relational == 0 && opt.mode != Supervision::kPanopticOnly) {
    if (hooks.log)
      *hooks.log << "warning: no scene has overlapping instances; training panoptic-only\n";
    opt.mode = Supervision::kPanopticOnly;
  }

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(derive_seed(cfg.seed, 1000 + epoch));
    rng.shuffle(order);
    const SgdOptions sgd{cfg.lr_at(epoch), cfg.momentum, cfg.weight_decay};
    EpochStats st;
    st.epoch = epoch;
    st.lr = sgd.lr;
    std::size_t rel_count = 0, in_batch = 0;
    std::vector<StepLosses> losses(samples.size());
    for (auto idx : order) {
      losses[idx] = scene_objective(res.model, samples[idx], opt, true);
      if (++in_batch == cfg.batch_size) {
        detail::update(res.model.params, cfg.grad_clip, sgd);
        in_batch = 0;
      }
    }
    if (in_batch) detail::update(res.model.params, cfg.grad_clip, sgd);
    // Summed in dataset order so the means do not depend on the shuffle.
    for (const auto& l : losses) {
      st.mean_total += l.total;
      st.mean_panoptic += l.panoptic;
      if (l.has_relation) {
        st.mean_relation += l.relation;
        ++rel_count;
      }
    }
    st.mean_total /= double(samples.size());
    st.mean_panoptic /= double(samples.size());
    if (rel_count) st.mean_relation /= double(rel_count);

    if (hooks.eval_data && !hooks.eval_data->empty()) {
      const bool last = epoch + 1 == cfg.epochs;
      const bool want_pq = last || (cfg.pq_every && (epoch + 1) % cfg.pq_every == 0);
      EvalOptions eo{hooks.fusion, want_pq, hooks.eval_jobs};
      eo.fusion.head = cfg.head;
      eo.fusion.k = cfg.k;
      const auto er = evaluate(*hooks.eval_data, res.model, eo);
      st.eval_oa = er.mean_oa;
      if (want_pq) st.eval_pq = er.pq_sog.all().pq;
    }
    if (hooks.log)
      *hooks.log << "epoch " << epoch << " lr " << st.lr << " loss " << st.mean_total
                 << " panoptic " << st.mean_panoptic << " relation " << st.mean_relation
                 << (st.eval_oa ? " oa " + std::to_string(*st.eval_oa) : std::string{})
                 << "\n";
    res.report.epochs.push_back(st);
    if (hooks.on_epoch) hooks.on_epoch(epoch, res.model);
  }
  res.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

/// Checks the analytic gradient of the full training objective on one scene.
inline GradCheckReport check_scene_gradient(EmbedModel& model, const TrainSample& s,
                                            const LossOptions& opt,
                                            const GradCheckOptions& gc = {}) {
  model.params.zero_grad();
  scene_objective(model, s, opt, true);
  auto loss = [&](const ParamStore& ps) {
    EmbedModel probe{model.dims, ps};
    return scene_objective(probe, s, opt, false).total;
  };
  GradCheckReport rep = finite_diff_check(loss, model.params, gc);
  model.params.zero_grad();
  return rep;
}

}  // namespace sog
