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

#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "sog/panohead.hpp"
#include "sog/relembed.hpp"
#include "sog/tensor_io.hpp"

namespace sog {

/// Head settings stored with a model so inference matches training.
struct HeadSettings {
  HeadVariant head = HeadVariant::kPH2;
  double k = 2.0;
};

// Model file layout:
//   {"format": "sog-model", "version": 1,
//    "dims": {"C_th", "r_c", "r_m", "d_c", "d_m", "d_b"},
//    "head": {"ph": 1|2, "k": real},
//    "params": {name: hex(SOGT bytes), ...}}
inline nlohmann::json model_to_json(const EmbedModel& m, const HeadSettings& hs = {}) {
  nlohmann::json j;
  j["format"] = "sog-model";
  j["version"] = 1;
  j["dims"] = {{"C_th", m.dims.n_classes}, {"r_c", m.dims.r_c}, {"r_m", m.dims.r_m},
               {"d_c", m.dims.d_c},        {"d_m", m.dims.d_m}, {"d_b", m.dims.d_b}};
  j["head"] = {{"ph", static_cast<int>(hs.head)}, {"k", hs.k}};
  auto& params = j["params"] = nlohmann::json::object();
  for (const auto& e : m.params.entries()) params[e.name] = to_hex(encode_tensor(e.value));
  return j;
}

struct LoadedModel {
  EmbedModel model;
  HeadSettings head;
};

inline LoadedModel model_from_json(const nlohmann::json& j) {
  auto fail = [](const std::string& msg) { throw ParseError("model file: " + msg, 0); };
  if (!j.is_object() || j.value("format", "") != "sog-model") fail("missing format tag");
  if (j.value("version", 0) != 1) fail("unsupported version");
  if (!j.contains("dims") || !j.contains("params")) fail("missing dims or params");
  LoadedModel out;
  try {
    const auto& d = j.at("dims");
    EmbedDims dims;
    dims.n_classes = d.at("C_th").get<std::size_t>();
    dims.r_c = d.at("r_c").get<std::size_t>();
    dims.r_m = d.at("r_m").get<std::size_t>();
    dims.d_c = d.at("d_c").get<std::size_t>();
    dims.d_m = d.at("d_m").get<std::size_t>();
    dims.d_b = d.at("d_b").get<std::size_t>();
    out.model = EmbedModel::create(dims, 0);
    if (j.contains("head")) {
      out.head.head = parse_head(j["head"].at("ph").get<int>());
      out.head.k = j["head"].at("k").get<double>();
    }
    const auto& params = j.at("params");
    for (auto& e : out.model.params.entries()) {
      if (!params.contains(e.name)) fail("missing parameter " + e.name);
      Tensor t = decode_tensor(from_hex(params.at(e.name).get<std::string>()));
      if (t.shape() != e.value.shape())
        fail("parameter " + e.name + " has shape " + shape_str(t.shape()) + ", expected " +
             shape_str(e.value.shape()));
      if (!t.all_finite()) fail("parameter " + e.name + " has non-finite values");
      e.value = std::move(t);
    }
    if (params.size() != out.model.params.entries().size()) fail("unexpected extra parameters");
  } catch (const nlohmann::json::exception& ex) {
    fail(ex.what());
  } catch (const ConfigError& ex) {
    fail(ex.what());
  }
  return out;
}

inline void save_model(const std::string& path, const EmbedModel& m, const HeadSettings& hs = {}) {
  const std::string text = model_to_json(m, hs).dump(1) + "\n";
  write_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline nlohmann::json read_json_file(const std::string& path) {
  const auto bytes = read_bytes(path);
  try {
    return nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::parse_error& ex) {
    throw ParseError(path + ": " + ex.what(), ex.byte);
  }
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
  const std::string text = j.dump(2) + "\n";
  write_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline LoadedModel load_model(const std::string& path) {
  return model_from_json(read_json_file(path));
}

}  // namespace sog
