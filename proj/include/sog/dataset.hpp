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

#include <cstdint>
#include <vector>

#include "sog/parallel.hpp"
#include "sog/scenegen.hpp"

namespace sog {

struct SceneRecord {
  std::uint64_t seed = 0;
  Scene scene;
  LogitPack logits;
  std::vector<DetectedInstance> detections;
};

inline std::uint64_t scene_seed(std::uint64_t dataset_seed, std::size_t index) {
  return derive_seed(dataset_seed, index);
}

// Scene, logits and detections all derive from the single per-scene seed.
inline SceneRecord make_scene_record(const SceneConfig& cfg, std::uint64_t seed) {
  SceneRecord rec;
  rec.seed = seed;
  rec.scene = generate_scene(cfg, seed);
  rec.logits = synth_logits(rec.scene, cfg, derive_seed(seed, 1));
  rec.detections = perturb_detections(rec.scene, cfg, derive_seed(seed, 2));
  return rec;
}

inline std::vector<SceneRecord> make_dataset(const SceneConfig& cfg, std::size_t count,
                                             std::uint64_t seed, std::size_t jobs = 1) {
  cfg.validate();
  std::vector<SceneRecord> out(count);
  parallel_for(count, jobs, [&](std::size_t i) {
    out[i] = make_scene_record(cfg, scene_seed(seed, i));
  });
  return out;
}

}  // namespace sog
