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

#include "json.hpp"
#include "sog/metrics.hpp"
#include "sog/trainer.hpp"

namespace sog {

// Wall time is opt-in so that reports of identical runs are byte-identical.
inline nlohmann::json to_json(const TrainReport& r, const TrainConfig& cfg,
                              bool with_wall_time = false) {
  nlohmann::json j;
  j["config"] = {{"epochs", cfg.epochs},
                 {"lr", cfg.lr},
                 {"decay_factor", cfg.decay_factor},
                 {"momentum", cfg.momentum},
                 {"weight_decay", cfg.weight_decay},
                 {"lambda_pan", cfg.lambda_pan},
                 {"lambda_rel", cfg.lambda_rel},
                 {"grad_clip", cfg.grad_clip},
                 {"mode", to_string(cfg.mode)},
                 {"ph", static_cast<int>(cfg.head)},
                 {"k", cfg.k},
                 {"batch_size", cfg.batch_size},
                 {"seed", cfg.seed}};
  auto& epochs = j["epochs"] = nlohmann::json::array();
  for (const auto& e : r.epochs) {
    nlohmann::json row = {{"epoch", e.epoch},
                          {"lr", e.lr},
                          {"mean_total", e.mean_total},
                          {"mean_panoptic", e.mean_panoptic},
                          {"mean_relation", e.mean_relation}};
    row["eval_oa"] = e.eval_oa ? nlohmann::json(*e.eval_oa) : nlohmann::json(nullptr);
    row["eval_pq"] = e.eval_pq ? nlohmann::json(*e.eval_pq) : nlohmann::json(nullptr);
    epochs.push_back(row);
  }
  if (with_wall_time) j["wall_seconds"] = r.wall_seconds;
  return j;
}

inline nlohmann::json to_json(const EvalReport& r) {
  return {{"mean_oa", r.mean_oa},
          {"oa_scenes", r.oa_scenes},
          {"pq_sog", r.pq_sog.all().pq},
          {"pq_heuristic", r.pq_heuristic.all().pq},
          {"pq_prior", r.pq_prior.all().pq},
          {"detail",
           {{"sog", to_json(r.pq_sog)},
            {"heuristic", to_json(r.pq_heuristic)},
            {"prior", to_json(r.pq_prior)}}}};
}

inline nlohmann::json segments_to_json(const PanopticMap& m) {
  auto arr = nlohmann::json::array();
  for (const auto& [id, info] : m.segments) {
    std::size_t a = 0;
    for (auto v : m.ids.values()) a += v == id;
    arr.push_back({{"id", id}, {"category", info.category}, {"isthing", info.isthing}, {"area", a}});
  }
  return {{"height", m.ids.height()}, {"width", m.ids.width()}, {"segments", arr}};
}

}  // namespace sog
