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

#include <array>
#include <cctype>
#include <cstdint>
#include <string>
#include <vector>

#include "sog/grid.hpp"
#include "sog/tensor_io.hpp"

namespace sog {

using Rgb = std::array<std::uint8_t, 3>;

inline std::vector<std::uint8_t> pnm_header(const char* magic, std::size_t w, std::size_t h,
                                            unsigned maxval) {
  const std::string s = std::string(magic) + "\n" + std::to_string(w) + " " +
                        std::to_string(h) + "\n" + std::to_string(maxval) + "\n";
  return {s.begin(), s.end()};
}

// Binary mask as P5, maxval 255, values 0/255.
inline void write_mask_pgm(const std::string& path, const Mask& m) {
  auto out = pnm_header("P5", m.width(), m.height(), 255);
  for (auto v : m.values()) out.push_back(v ? 255 : 0);
  write_bytes(path, out);
}

// 16-bit P5, big-endian samples as the format requires.
inline void write_pgm16(const std::string& path, const Grid<std::uint16_t>& g) {
  auto out = pnm_header("P5", g.width(), g.height(), 65535);
  for (auto v : g.values()) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  }
  write_bytes(path, out);
}

inline void write_ppm(const std::string& path, const Grid<Rgb>& g) {
  auto out = pnm_header("P6", g.width(), g.height(), 255);
  for (const auto& px : g.values()) out.insert(out.end(), px.begin(), px.end());
  write_bytes(path, out);
}

namespace detail {

struct PnmImage {
  std::size_t w = 0, h = 0;
  unsigned maxval = 0;
  std::size_t data_offset = 0;
  std::vector<std::uint8_t> bytes;
};

inline PnmImage read_pnm(const std::string& path, const char* magic) {
  PnmImage img;
  img.bytes = read_bytes(path);
  const auto& b = img.bytes;
  std::size_t pos = 0;
  auto skip_ws = [&] {
    while (pos < b.size()) {
      if (b[pos] == '#') {
        while (pos < b.size() && b[pos] != '\n') ++pos;
      } else if (std::isspace(b[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_uint = [&]() -> std::size_t {
    skip_ws();
    if (pos >= b.size() || !std::isdigit(b[pos])) throw ParseError(path + ": expected integer", pos);
    std::size_t v = 0;
    while (pos < b.size() && std::isdigit(b[pos])) v = v * 10 + (b[pos++] - '0');
    return v;
  };
  if (b.size() < 2 || b[0] != magic[0] || b[1] != magic[1])
    throw ParseError(path + ": bad magic, expected " + magic, 0);
  pos = 2;
  img.w = read_uint();
  img.h = read_uint();
  img.maxval = static_cast<unsigned>(read_uint());
  if (pos >= b.size() || !std::isspace(b[pos])) throw ParseError(path + ": bad header", pos);
  ++pos;
  img.data_offset = pos;
  return img;
}

}  // namespace detail

inline Mask read_mask_pgm(const std::string& path) {
  auto img = detail::read_pnm(path, "P5");
  if (img.maxval != 255) throw ParseError(path + ": expected maxval 255", img.data_offset);
  if (img.bytes.size() != img.data_offset + img.w * img.h)
    throw ParseError(path + ": truncated pixel data", img.bytes.size());
  Mask m(img.h, img.w);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = img.bytes[img.data_offset + i] ? 1 : 0;
  return m;
}

inline Grid<std::uint16_t> read_pgm16(const std::string& path) {
  auto img = detail::read_pnm(path, "P5");
  if (img.maxval != 65535) throw ParseError(path + ": expected maxval 65535", img.data_offset);
  if (img.bytes.size() != img.data_offset + 2 * img.w * img.h)
    throw ParseError(path + ": truncated pixel data", img.bytes.size());
  Grid<std::uint16_t> g(img.h, img.w);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto* p = img.bytes.data() + img.data_offset + 2 * i;
    g[i] = static_cast<std::uint16_t>(p[0] << 8 | p[1]);
  }
  return g;
}

/// Square heatmap of an N x N matrix, `cell` pixels per entry.
/// Value 0 maps to black and 1 to white, clamped, linear in between.
inline Grid<Rgb> heatmap(const Tensor& m, std::size_t cell = 16) {
  require_rank(m, 2, "heatmap");
  Grid<Rgb> g(m.dim(0) * cell, m.dim(1) * cell);
  for (std::size_t r = 0; r < g.height(); ++r)
    for (std::size_t c = 0; c < g.width(); ++c) {
      const double v = std::clamp(m.at(r / cell, c / cell), 0.0, 1.0);
      const auto level = static_cast<std::uint8_t>(std::lround(v * 255.0));
      g(r, c) = {level, level, level};
    }
  return g;
}

// Fixed palette for segment renderings; index 0 is reserved for void (black).
inline Rgb palette_color(std::uint32_t id) {
  if (id == 0) return {0, 0, 0};
  std::uint32_t h = id * 2654435761u;
  return {static_cast<std::uint8_t>(64 + (h & 0xBF)),
          static_cast<std::uint8_t>(64 + ((h >> 8) & 0xBF)),
          static_cast<std::uint8_t>(64 + ((h >> 16) & 0xBF))};
}

}  // namespace sog
