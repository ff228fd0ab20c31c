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

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sog/dataset_io.hpp"
#include "sog/fusion.hpp"
#include "sog/model_io.hpp"
#include "sog/protocol.hpp"
#include "sog/reports.hpp"

namespace sog::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kNumericError = 3 };

// Raised for flag values that parse but make no sense (negative epochs, ...).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Class names in priors files are "thing_<k>" with k a thing-class index.
inline std::size_t parse_thing_name(const std::string& s, std::size_t n_thing) {
  const std::string prefix = "thing_";
  if (s.rfind(prefix, 0) != 0 || s.size() == prefix.size())
    throw ParseError("priors: class name '" + s + "' is not of the form thing_<k>", 0);
  std::size_t k = 0;
  for (std::size_t i = prefix.size(); i < s.size(); ++i) {
    if (s[i] < '0' || s[i] > '9')
      throw ParseError("priors: class name '" + s + "' is not of the form thing_<k>", i);
    k = k * 10 + std::size_t(s[i] - '0');
    if (k >= n_thing) throw ParseError("priors: class '" + s + "' out of range", i);
  }
  return k;
}

// Priors file: JSON list of [above, below] class-name pairs.
inline std::vector<std::pair<std::size_t, std::size_t>> read_priors(const std::string& path,
                                                                    std::size_t n_thing) {
  const auto j = read_json_file(path);
  if (!j.is_array()) throw ParseError(path + ": priors must be a JSON list", 0);
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& pair : j) {
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_string() || !pair[1].is_string())
      throw ParseError(path + ": each prior must be a pair of class names", 0);
    const auto a = parse_thing_name(pair[0].get<std::string>(), n_thing);
    const auto b = parse_thing_name(pair[1].get<std::string>(), n_thing);
    if (a == b) throw ParseError(path + ": prior pairs a class with itself", 0);
    out.emplace_back(a, b);
  }
  return out;
}

inline Grid<Rgb> render_panoptic(const PanopticMap& m) {
  Grid<Rgb> g(m.ids.height(), m.ids.width());
  for (std::size_t p = 0; p < g.size(); ++p) g[p] = palette_color(std::uint32_t(m.ids[p]));
  return g;
}

inline void write_panoptic(const std::string& prefix, const PanopticMap& m) {
  Grid<std::uint16_t> ids(m.ids.height(), m.ids.width());
  for (std::size_t p = 0; p < ids.size(); ++p) ids[p] = static_cast<std::uint16_t>(m.ids[p]);
  write_pgm16(prefix + ".pgm", ids);
  write_json_file(prefix + ".json", segments_to_json(m));
  write_ppm(prefix + ".ppm", render_panoptic(m));
}

struct GenArgs {
  std::string out, config;
  std::size_t count = 0;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
};

struct TrainArgs {
  std::string data, out, report, eval_data;
  std::size_t epochs = kStandardEpochs;
  std::string mode = "panoptic+lr";
  int ph = 2;
  double lr = 0.01;
  double lambda_pan = 1.0, lambda_rel = 1.0, grad_clip = 1.0;
  std::size_t batch_size = 1;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 0;
  std::size_t jobs = 1;
  bool self_check = false, timing = false, verbose = false;
};

struct EvalArgs {
  std::string data, model, report, priors;
  std::size_t jobs = 1;
};

struct FuseArgs {
  std::string scene, model, mode = "sog", priors, out;
};

struct ExportArgs {
  std::string scene, model, out;
};

inline int run_gen(const GenArgs& a, std::ostream& out) {
  if (a.count == 0) throw UsageError("gen: --count must be >= 1");
  SceneConfig cfg = standard_scene_config();
  if (!a.config.empty()) {
    try {
      cfg = read_json_file(a.config).get<SceneConfig>();
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(a.config + ": " + ex.what(), 0);
    }
  }
  cfg.validate();
  Dataset ds{cfg, a.seed, make_dataset(cfg, a.count, a.seed, a.jobs)};
  write_dataset(a.out, ds, a.jobs);
  out << "wrote " << a.count << " scenes to " << a.out << "\n";
  return kOk;
}

inline int run_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  TrainConfig tc;
  try {
    tc = standard_train_config(parse_supervision(a.mode), parse_head(a.ph), a.seed);
    tc.epochs = a.epochs;
    tc.lr = a.lr;
    tc.lambda_pan = a.lambda_pan;
    tc.lambda_rel = a.lambda_rel;
    tc.grad_clip = a.grad_clip;
    tc.batch_size = a.batch_size;
    tc.validate();
  } catch (const ConfigError& ex) {
    throw UsageError(ex.what());
  }
  const Dataset ds = read_dataset(a.data, a.jobs);
  require(!ds.records.empty(), "train: dataset is empty");
  std::optional<Dataset> eval_ds;
  if (!a.eval_data.empty()) eval_ds = read_dataset(a.eval_data, a.jobs);

  if (a.self_check) {
    const auto dims = [&] {
      EmbedDims d = tc.dims;
      d.n_classes = ds.records.front().scene.n_thing_classes;
      return d;
    }();
    EmbedModel probe = EmbedModel::create(dims, derive_seed(tc.seed, 0xE3B));
    for (const auto& rec : ds.records) {
      const auto s = prepare_sample(rec.scene, rec.logits, dims.n_classes);
      if (s.subset.size() < 2) continue;
      GradCheckOptions gc;
      gc.seed = tc.seed;
      gc.skip_kinks = true;
      const auto rep = check_scene_gradient(probe, s, loss_options(tc), gc);
      err << "self-check: max relative error " << rep.max_rel_error() << "\n";
      if (!rep.pass) throw NumericError("self-check failed: " + rep.failure.value_or("gradient mismatch"));
      break;
    }
  }

  const HeadSettings hs{tc.head, tc.k};
  TrainHooks hooks;
  if (eval_ds) hooks.eval_data = &eval_ds->records;
  hooks.eval_jobs = a.jobs;
  if (a.verbose) hooks.log = &err;
  if (a.checkpoint_every)
    hooks.on_epoch = [&](std::size_t epoch, const EmbedModel& m) {
      if ((epoch + 1) % a.checkpoint_every == 0)
        save_model(a.out + ".epoch" + std::to_string(epoch + 1), m, hs);
    };
  const auto res = train(ds.records, tc, hooks);
  save_model(a.out, res.model, hs);
  const std::string report = a.report.empty() ? a.out + ".report.json" : a.report;
  write_json_file(report, to_json(res.report, tc, a.timing));
  out << "trained " << tc.epochs << " epochs on " << ds.records.size() << " scenes; model "
      << a.out << ", report " << report << "\n";
  return kOk;
}

inline int run_eval(const EvalArgs& a, std::ostream& out) {
  const Dataset ds = read_dataset(a.data, a.jobs);
  require(!ds.records.empty(), "eval: dataset is empty");
  const auto lm = load_model(a.model);
  EvalOptions eo;
  eo.fusion.head = lm.head.head;
  eo.fusion.k = lm.head.k;
  eo.jobs = a.jobs;
  if (!a.priors.empty()) eo.fusion.priors = read_priors(a.priors, ds.config.n_thing_classes);
  const auto rep = evaluate(ds.records, lm.model, eo);
  write_json_file(a.report, to_json(rep));
  out << "mean_oa " << rep.mean_oa << " pq_sog " << rep.pq_sog.all().pq << " pq_heuristic "
      << rep.pq_heuristic.all().pq << " pq_prior " << rep.pq_prior.all().pq << "\n";
  return kOk;
}

inline int run_fuse(const FuseArgs& a, std::ostream& out) {
  if (a.mode != "sog" && a.mode != "heuristic" && a.mode != "prior")
    throw UsageError("fuse: --mode must be sog, heuristic or prior");
  if (a.mode == "sog" && a.model.empty()) throw UsageError("fuse: --mode sog needs --model");
  const SceneRecord rec = read_scene_dir(a.scene);
  const auto in = fusion_input(rec.scene, rec.logits);
  FusionConfig fc;
  if (!a.priors.empty()) fc.priors = read_priors(a.priors, rec.scene.n_thing_classes);
  PanopticMap pm;
  if (a.mode == "sog") {
    const auto lm = load_model(a.model);
    fc.head = lm.head.head;
    fc.k = lm.head.k;
    pm = sog_infer(rec.detections, in, lm.model, fc);
  } else if (a.mode == "heuristic") {
    pm = heuristic_fuse(rec.detections, in, fc);
  } else {
    pm = prior_fuse(rec.detections, in, fc);
  }
  write_panoptic(a.out, pm);
  const auto pq = panoptic_quality(pm, scene_panoptic(rec.scene)).all();
  out << a.mode << ": " << pm.segments.size() << " segments, pq " << pq.pq << "\n";
  return kOk;
}

inline int run_export(const ExportArgs& a, std::ostream& out) {
  const SceneRecord rec = read_scene_dir(a.scene);
  const auto lm = load_model(a.model);
  require(lm.model.dims.n_classes == rec.scene.n_thing_classes,
          "export: model class count does not match the scene");
  const Tensor o = scene_overlap(lm.model, rec.scene);
  const Tensor rstar = scene_rstar(rec.scene);
  std::vector<Mask> amodal;
  for (const auto& inst : rec.scene.instances) amodal.push_back(inst.amodal);
  const Tensor r = sym_relation(amodal);
  write_ppm(a.out + "_O.ppm", heatmap(o));
  write_ppm(a.out + "_Rstar.ppm", heatmap(rstar));
  write_ppm(a.out + "_R.ppm", heatmap(r));
  write_tensor(a.out + "_O.sogt", o);
  write_tensor(a.out + "_Rstar.sogt", rstar);
  write_tensor(a.out + "_R.sogt", r);
  out << "exported " << rec.scene.size() << "x" << rec.scene.size() << " matrices to " << a.out
      << "_*\n";
  return kOk;
}

/// Parses argv and runs one subcommand. Exit codes: 0 success, 1 usage error,
/// 2 data or format error, 3 numeric failure.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Scene overlap graph toolkit: synthetic occlusion scenes, training, fusion"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "generate a synthetic dataset directory");
  g->add_option("--out", gen.out, "output directory")->required();
  g->add_option("--count", gen.count, "number of scenes")->required();
  g->add_option("--seed", gen.seed, "dataset seed");
  g->add_option("--config", gen.config, "SceneConfig JSON file");
  g->add_option("--jobs", gen.jobs, "worker threads")->check(CLI::PositiveNumber);

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train the relational embedding");
  t->add_option("--data", tr.data, "dataset directory")->required();
  t->add_option("--out", tr.out, "model file to write")->required();
  t->add_option("--epochs", tr.epochs, "epochs");
  t->add_option("--mode", tr.mode, "panoptic_only | panoptic+lr | panoptic+lrstar");
  t->add_option("--ph", tr.ph, "panoptic head variant (1 or 2)");
  t->add_option("--lr", tr.lr, "initial learning rate");
  t->add_option("--lambda-pan", tr.lambda_pan, "panoptic loss weight");
  t->add_option("--lambda-rel", tr.lambda_rel, "relation loss weight");
  t->add_option("--grad-clip", tr.grad_clip, "gradient norm bound, 0 disables");
  t->add_option("--batch-size", tr.batch_size, "scenes per step");
  t->add_option("--seed", tr.seed, "training seed");
  t->add_option("--report", tr.report, "report file (default MODEL.report.json)");
  t->add_option("--eval-data", tr.eval_data, "dataset evaluated after every epoch");
  t->add_option("--checkpoint-every", tr.checkpoint_every, "write MODEL.epochK every K epochs");
  t->add_option("--jobs", tr.jobs, "worker threads for loading and evaluation")
      ->check(CLI::PositiveNumber);
  t->add_flag("--self-check", tr.self_check, "gradient-check one scene before training");
  t->add_flag("--timing", tr.timing, "include wall time in the report");
  t->add_flag("--verbose", tr.verbose, "log every epoch to stderr");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "evaluate OA and PQ on a dataset");
  e->add_option("--data", ev.data, "dataset directory")->required();
  e->add_option("--model", ev.model, "model file")->required();
  e->add_option("--report", ev.report, "JSON report to write")->required();
  e->add_option("--priors", ev.priors, "label priors for prior fusion");
  e->add_option("--jobs", ev.jobs, "worker threads")->check(CLI::PositiveNumber);

  FuseArgs fu;
  auto* f = app.add_subcommand("fuse", "fuse one scene into a panoptic map");
  f->add_option("--scene", fu.scene, "scene directory")->required();
  f->add_option("--model", fu.model, "model file (sog mode)");
  f->add_option("--mode", fu.mode, "sog | heuristic | prior");
  f->add_option("--priors", fu.priors, "label priors JSON");
  f->add_option("--out", fu.out, "output prefix")->required();

  ExportArgs ex;
  auto* x = app.add_subcommand("export", "write O, R and R* heatmaps for one scene");
  x->add_option("--scene", ex.scene, "scene directory")->required();
  x->add_option("--model", ex.model, "model file")->required();
  x->add_option("--out", ex.out, "output prefix")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& pe) {
    err << "usage error: " << pe.what() << "\n";
    return kUsage;
  }

  try {
    if (g->parsed()) return run_gen(gen, out);
    if (t->parsed()) return run_train(tr, out, err);
    if (e->parsed()) return run_eval(ev, out);
    if (f->parsed()) return run_fuse(fu, out);
    if (x->parsed()) return run_export(ex, out);
  } catch (const UsageError& ue) {
    err << "usage error: " << ue.what() << "\n";
    return kUsage;
  } catch (const NumericError& ne) {
    err << "numeric error: " << ne.what() << "\n";
    return kNumericError;
  } catch (const std::exception& de) {
    err << "error: " << de.what() << "\n";
    return kDataError;
  }
  return kUsage;
}

}  // namespace sog::cli
