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
#include <string>
#include <vector>

#include "json.hpp"
#include "sog/dataset.hpp"
#include "sog/image_io.hpp"
#include "sog/model_io.hpp"
#include "sog/parallel.hpp"

namespace sog {

// Dataset directory layout:
//   manifest.json            {"format", "version", "config", "count", "seed", "scenes": [...]}
//   scene<K>/instances.json  scene header, per-instance and per-detection metadata
//   scene<K>/amodal_<i>.pgm, visible_<i>.pgm     P5 masks, 0/255
//   scene<K>/stuff_map.pgm, sem_map.pgm, id_map.pgm   16-bit P5
//   scene<K>/boxes.sogt (N x 4), patch_logits.sogt (N x 28 x 28), sem_logits.sogt (H x W x C)
//   scene<K>/det_boxes.sogt (N x 4), det_patch_logits.sogt (N x 28 x 28)

inline std::string scene_dir_name(std::size_t index) { return "scene" + std::to_string(index); }

inline const char* shape_name(ShapeKind k) {
  return k == ShapeKind::kEllipse ? "ellipse" : "rectangle";
}

inline ShapeKind parse_shape(const std::string& s) {
  if (s == "ellipse") return ShapeKind::kEllipse;
  if (s == "rectangle") return ShapeKind::kRectangle;
  throw ParseError("unknown shape kind '" + s + "'", 0);
}

namespace detail {

inline Tensor boxes_tensor(const std::vector<Box>& boxes) {
  Tensor t({boxes.size(), 4});
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    t.at(i, 0) = boxes[i].x;
    t.at(i, 1) = boxes[i].y;
    t.at(i, 2) = boxes[i].w;
    t.at(i, 3) = boxes[i].h;
  }
  return t;
}

inline Grid<std::uint16_t> to_u16(const IdGrid& g) {
  Grid<std::uint16_t> out(g.height(), g.width());
  for (std::size_t p = 0; p < g.size(); ++p) {
    require(g[p] >= 0 && g[p] <= 65535, "id map value out of 16-bit range");
    out[p] = static_cast<std::uint16_t>(g[p]);
  }
  return out;
}

inline IdGrid from_u16(const Grid<std::uint16_t>& g) {
  IdGrid out(g.height(), g.width());
  for (std::size_t p = 0; p < g.size(); ++p) out[p] = g[p];
  return out;
}

inline Tensor read_shaped(const std::filesystem::path& path, const Shape& expected) {
  Tensor t = read_tensor(path.string());
  if (t.shape() != expected)
    throw ParseError(path.string() + ": shape " + shape_str(t.shape()) + ", expected " +
                         shape_str(expected),
                     0);
  return t;
}

inline Mask read_sized_mask(const std::filesystem::path& path, std::size_t H, std::size_t W) {
  Mask m = read_mask_pgm(path.string());
  if (m.height() != H || m.width() != W)
    throw ParseError(path.string() + ": mask size does not match the scene", 0);
  return m;
}

}  // namespace detail

/// Throws ConfigError when a loaded scene breaks a Scene invariant.
inline void validate_scene(const Scene& s, const LogitPack& logits) {
  const std::size_t n = s.size(), H = s.height, W = s.width;
  const std::size_t C = s.n_thing_classes + s.n_stuff_classes;
  require(logits.patch_logits.shape() == Shape{n, kPatchSize, kPatchSize},
          "scene: patch logits do not match the instance count");
  require(logits.sem_logits.shape() == Shape{H, W, C}, "scene: semantic logits have wrong shape");
  Mask covered(H, W);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& inst = s.instances[i];
    require(inst.category < s.n_thing_classes, "scene: instance category out of range");
    require(inst.box.w > 0 && inst.box.h > 0, "scene: degenerate instance box");
    for (std::size_t p = 0; p < H * W; ++p) {
      require(!inst.visible[p] || inst.amodal[p], "scene: visible mask not inside amodal mask");
      require(!(inst.visible[p] && covered[p]), "scene: visible masks overlap");
      covered[p] = covered[p] || inst.visible[p];
      require((s.id_map[p] == std::int32_t(i)) == bool(inst.visible[p]),
              "scene: id map disagrees with a visible mask");
    }
  }
  for (std::size_t p = 0; p < H * W; ++p) {
    require(s.id_map[p] >= 0 && s.id_map[p] < std::int32_t(n + s.n_stuff_classes),
            "scene: id map value out of range");
    require(s.stuff_map[p] >= 0 && s.stuff_map[p] < std::int32_t(s.n_stuff_classes),
            "scene: stuff map value out of range");
    require(s.sem_map[p] >= 0 && s.sem_map[p] < std::int32_t(C), "scene: sem map value out of range");
  }
}

inline void write_scene_dir(const std::filesystem::path& dir, const SceneRecord& rec) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const auto& s = rec.scene;
  nlohmann::json meta;
  meta["seed"] = rec.seed;
  meta["height"] = s.height;
  meta["width"] = s.width;
  meta["n_thing_classes"] = s.n_thing_classes;
  meta["n_stuff_classes"] = s.n_stuff_classes;
  auto& insts = meta["instances"] = nlohmann::json::array();
  std::vector<Box> boxes;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto& inst = s.instances[i];
    insts.push_back({{"category", inst.category},
                     {"shape", shape_name(inst.shape)},
                     {"depth_rank", inst.depth_rank},
                     {"score", inst.score}});
    boxes.push_back(inst.box);
    write_mask_pgm((dir / ("amodal_" + std::to_string(i) + ".pgm")).string(), inst.amodal);
    write_mask_pgm((dir / ("visible_" + std::to_string(i) + ".pgm")).string(), inst.visible);
  }
  auto& dets = meta["detections"] = nlohmann::json::array();
  std::vector<Box> det_boxes;
  Tensor det_logits({rec.detections.size(), kPatchSize, kPatchSize});
  for (std::size_t i = 0; i < rec.detections.size(); ++i) {
    const auto& d = rec.detections[i];
    dets.push_back({{"class_id", d.class_id}, {"score", d.score}});
    det_boxes.push_back(d.box);
    std::copy(d.patch_logits.data().begin(), d.patch_logits.data().end(),
              det_logits.data().begin() + long(i * kPatchSize * kPatchSize));
  }
  write_json_file((dir / "instances.json").string(), meta);
  write_pgm16((dir / "stuff_map.pgm").string(), detail::to_u16(s.stuff_map));
  write_pgm16((dir / "sem_map.pgm").string(), detail::to_u16(s.sem_map));
  write_pgm16((dir / "id_map.pgm").string(), detail::to_u16(s.id_map));
  write_tensor((dir / "boxes.sogt").string(), detail::boxes_tensor(boxes));
  write_tensor((dir / "patch_logits.sogt").string(), rec.logits.patch_logits);
  write_tensor((dir / "sem_logits.sogt").string(), rec.logits.sem_logits);
  write_tensor((dir / "det_boxes.sogt").string(), detail::boxes_tensor(det_boxes));
  write_tensor((dir / "det_patch_logits.sogt").string(), det_logits);
}

inline SceneRecord read_scene_dir(const std::filesystem::path& dir) {
  const auto meta = read_json_file((dir / "instances.json").string());
  SceneRecord rec;
  auto& s = rec.scene;
  try {
    rec.seed = meta.value<std::uint64_t>("seed", 0);
    s.height = meta.at("height").get<std::size_t>();
    s.width = meta.at("width").get<std::size_t>();
    s.n_thing_classes = meta.at("n_thing_classes").get<std::size_t>();
    s.n_stuff_classes = meta.at("n_stuff_classes").get<std::size_t>();
    const std::size_t H = s.height, W = s.width;
    const auto& insts = meta.at("instances");
    const std::size_t n = insts.size();
    const Tensor boxes = detail::read_shaped(dir / "boxes.sogt", {n, 4});
    for (std::size_t i = 0; i < n; ++i) {
      Instance inst;
      inst.category = insts[i].at("category").get<std::size_t>();
      inst.shape = parse_shape(insts[i].at("shape").get<std::string>());
      inst.depth_rank = insts[i].at("depth_rank").get<int>();
      inst.score = insts[i].at("score").get<double>();
      inst.box = {boxes.at(i, 0), boxes.at(i, 1), boxes.at(i, 2), boxes.at(i, 3)};
      inst.amodal = detail::read_sized_mask(dir / ("amodal_" + std::to_string(i) + ".pgm"), H, W);
      inst.visible = detail::read_sized_mask(dir / ("visible_" + std::to_string(i) + ".pgm"), H, W);
      s.instances.push_back(std::move(inst));
    }
    auto read_map = [&](const char* name) {
      IdGrid g = detail::from_u16(read_pgm16((dir / name).string()));
      if (g.height() != H || g.width() != W)
        throw ParseError((dir / name).string() + ": map size does not match the scene", 0);
      return g;
    };
    s.stuff_map = read_map("stuff_map.pgm");
    s.sem_map = read_map("sem_map.pgm");
    s.id_map = read_map("id_map.pgm");
    const std::size_t C = s.n_thing_classes + s.n_stuff_classes;
    rec.logits.patch_logits = detail::read_shaped(dir / "patch_logits.sogt", {n, kPatchSize, kPatchSize});
    rec.logits.sem_logits = detail::read_shaped(dir / "sem_logits.sogt", {H, W, C});

    const auto& dets = meta.at("detections");
    const std::size_t m = dets.size();
    const Tensor det_boxes = detail::read_shaped(dir / "det_boxes.sogt", {m, 4});
    const Tensor det_logits =
        detail::read_shaped(dir / "det_patch_logits.sogt", {m, kPatchSize, kPatchSize});
    for (std::size_t i = 0; i < m; ++i) {
      DetectedInstance d;
      d.class_id = dets[i].at("class_id").get<std::size_t>();
      d.score = dets[i].at("score").get<double>();
      d.box = {det_boxes.at(i, 0), det_boxes.at(i, 1), det_boxes.at(i, 2), det_boxes.at(i, 3)};
      require(d.class_id < s.n_thing_classes, "detection class out of range");
      require(d.score > 0.0 && d.score <= 1.0, "detection score outside (0,1]");
      require(d.box.w > 0 && d.box.h > 0, "degenerate detection box");
      const auto off = long(i * kPatchSize * kPatchSize);
      std::copy(det_logits.data().begin() + off,
                det_logits.data().begin() + off + long(kPatchSize * kPatchSize),
                d.patch_logits.data().begin());
      rec.detections.push_back(std::move(d));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError((dir / "instances.json").string() + ": " + ex.what(), 0);
  }
  validate_scene(rec.scene, rec.logits);
  return rec;
}

struct Dataset {
  SceneConfig config;
  std::uint64_t seed = 0;
  std::vector<SceneRecord> records;
};

inline void write_dataset(const std::filesystem::path& dir, const Dataset& ds, std::size_t jobs = 1) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["format"] = "sog-dataset";
  manifest["version"] = 1;
  manifest["config"] = ds.config;
  manifest["seed"] = ds.seed;
  manifest["count"] = ds.records.size();
  auto& scenes = manifest["scenes"] = nlohmann::json::array();
  for (std::size_t i = 0; i < ds.records.size(); ++i)
    scenes.push_back({{"dir", scene_dir_name(i)}, {"seed", ds.records[i].seed}});
  write_json_file((dir / "manifest.json").string(), manifest);
  parallel_for(ds.records.size(), jobs,
               [&](std::size_t i) { write_scene_dir(dir / scene_dir_name(i), ds.records[i]); });
}

inline Dataset read_dataset(const std::filesystem::path& dir, std::size_t jobs = 1) {
  const auto manifest = read_json_file((dir / "manifest.json").string());
  Dataset ds;
  std::vector<std::string> names;
  try {
    if (manifest.value("format", "") != "sog-dataset")
      throw ParseError((dir / "manifest.json").string() + ": missing format tag", 0);
    ds.config = manifest.at("config").get<SceneConfig>();
    ds.seed = manifest.at("seed").get<std::uint64_t>();
    for (const auto& s : manifest.at("scenes")) names.push_back(s.at("dir").get<std::string>());
    if (names.size() != manifest.at("count").get<std::size_t>())
      throw ParseError((dir / "manifest.json").string() + ": count does not match scenes", 0);
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError((dir / "manifest.json").string() + ": " + ex.what(), 0);
  }
  ds.records.resize(names.size());
  parallel_for(names.size(), jobs,
               [&](std::size_t i) { ds.records[i] = read_scene_dir(dir / names[i]); });
  return ds;
}

}  // namespace sog
