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
#include <vector>

#include "sog/error.hpp"
#include "sog/tensor.hpp"

namespace sog {

/// H x W raster, row-major.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(std::size_t h, std::size_t w, T fill = T{}) : h_(h), w_(w), data_(h * w, fill) {}

  std::size_t height() const noexcept { return h_; }
  std::size_t width() const noexcept { return w_; }
  std::size_t size() const noexcept { return data_.size(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * w_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * w_ + c]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::vector<T>& values() noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t h_ = 0, w_ = 0;
  std::vector<T> data_;
};

using Mask = Grid<std::uint8_t>;  // 0 or 1
using IdGrid = Grid<std::int32_t>;

inline std::size_t area(const Mask& m) {
  std::size_t n = 0;
  for (auto v : m.values()) n += v != 0;
  return n;
}

inline std::size_t intersection_area(const Mask& a, const Mask& b) {
  require(a.height() == b.height() && a.width() == b.width(),
          "intersection_area: mask size mismatch");
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) n += (a[i] != 0) && (b[i] != 0);
  return n;
}

/// Axis-aligned box. With integer coordinates the box covers pixel columns
/// x .. x+w-1 and rows y .. y+h-1.
struct Box {
  double x = 0, y = 0, w = 1, h = 1;
  friend bool operator==(const Box&, const Box&) = default;
};

inline void require_box(const Box& b, const std::string& what) {
  if (!(b.w > 0.0) || !(b.h > 0.0) || !std::isfinite(b.x) || !std::isfinite(b.y))
    throw ConfigError(what + ": degenerate box (w=" + std::to_string(b.w) +
                      ", h=" + std::to_string(b.h) + ")");
}

// Tight box around a mask's support; nullopt-like (w=h=0) if empty.
inline Box mask_bbox(const Mask& m) {
  std::size_t r0 = m.height(), r1 = 0, c0 = m.width(), c1 = 0;
  bool any = false;
  for (std::size_t r = 0; r < m.height(); ++r)
    for (std::size_t c = 0; c < m.width(); ++c)
      if (m(r, c)) {
        any = true;
        r0 = std::min(r0, r);
        r1 = std::max(r1, r);
        c0 = std::min(c0, c);
        c1 = std::max(c1, c);
      }
  if (!any) return {0, 0, 0, 0};
  return {double(c0), double(r0), double(c1 - c0 + 1), double(r1 - r0 + 1)};
}

namespace bilinear {

struct Tap {
  std::size_t r0, r1, c0, c1;
  double fr, fc;  // fractional offsets toward r1 / c1
};

// Sample position (row, col) on an h x w lattice with clamping at the border.
inline Tap tap(double row, double col, std::size_t h, std::size_t w) {
  row = std::clamp(row, 0.0, double(h - 1));
  col = std::clamp(col, 0.0, double(w - 1));
  Tap t;
  t.r0 = static_cast<std::size_t>(std::floor(row));
  t.c0 = static_cast<std::size_t>(std::floor(col));
  t.r1 = std::min(t.r0 + 1, h - 1);
  t.c1 = std::min(t.c0 + 1, w - 1);
  t.fr = row - double(t.r0);
  t.fc = col - double(t.c0);
  return t;
}

template <typename Get>
double sample(const Tap& t, Get&& get) {
  // Nested lerps reproduce constant regions exactly.
  const double top = get(t.r0, t.c0) + t.fc * (get(t.r0, t.c1) - get(t.r0, t.c0));
  const double bot = get(t.r1, t.c0) + t.fc * (get(t.r1, t.c1) - get(t.r1, t.c0));
  return top + t.fr * (bot - top);
}

template <typename Put>
void scatter(const Tap& t, double g, Put&& put) {
  put(t.r0, t.c0, (1 - t.fr) * (1 - t.fc) * g);
  put(t.r0, t.c1, (1 - t.fr) * t.fc * g);
  put(t.r1, t.c0, t.fr * (1 - t.fc) * g);
  put(t.r1, t.c1, t.fr * t.fc * g);
}

// Corner-aligned map from output index i in [0, n) to the extent [origin, origin+len-1].
inline double corner_aligned(std::size_t i, std::size_t n, double origin, double len) {
  if (n <= 1) return origin;
  return origin + double(i) * (len - 1.0) / double(n - 1);
}

}  // namespace bilinear

/// Bilinear resample of the box region of an image (H x W lattice) onto an
/// out_h x out_w grid whose corner samples sit on the box corners.
template <typename T>
Tensor resample_box(const Grid<T>& img, const Box& box, std::size_t out_h, std::size_t out_w) {
  require_box(box, "resample_box");
  Tensor out({out_h, out_w});
  auto get = [&](std::size_t r, std::size_t c) { return double(img(r, c)); };
  for (std::size_t u = 0; u < out_h; ++u) {
    const double row = bilinear::corner_aligned(u, out_h, box.y, box.h);
    for (std::size_t v = 0; v < out_w; ++v) {
      const double col = bilinear::corner_aligned(v, out_w, box.x, box.w);
      out.at(u, v) = bilinear::sample(bilinear::tap(row, col, img.height(), img.width()), get);
    }
  }
  return out;
}

}  // namespace sog
