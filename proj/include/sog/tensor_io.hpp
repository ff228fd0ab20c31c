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

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "sog/tensor.hpp"

namespace sog {

// SOGT layout: "SOGT", u32 LE rank, rank x u32 LE extents, f64 LE data.
inline constexpr char kTensorMagic[4] = {'S', 'O', 'G', 'T'};

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint64_t get_le(const std::uint8_t* p, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= std::uint64_t{p[i]} << (8 * i);
  return v;
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + 4 * t.rank() + 8 * t.size());
  out.insert(out.end(), std::begin(kTensorMagic), std::end(kTensorMagic));
  detail::put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) detail::put_u32(out, static_cast<std::uint32_t>(d));
  for (double v : t.data()) detail::put_u64(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

inline Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
  const std::size_t n = bytes.size();
  if (n < 4) throw ParseError("SOGT: truncated magic", n);
  if (std::memcmp(bytes.data(), kTensorMagic, 4) != 0)
    throw ParseError("SOGT: bad magic", 0);
  if (n < 8) throw ParseError("SOGT: truncated rank", n);
  const auto rank = static_cast<std::size_t>(detail::get_le(bytes.data() + 4, 4));
  std::size_t off = 8;
  if (n < off + 4 * rank) throw ParseError("SOGT: truncated shape", n);
  Shape shape(rank);
  for (std::size_t i = 0; i < rank; ++i, off += 4)
    shape[i] = static_cast<std::size_t>(detail::get_le(bytes.data() + off, 4));
  const std::size_t count = shape_size(shape);
  if (n < off + 8 * count) throw ParseError("SOGT: truncated data", n);
  if (n > off + 8 * count) throw ParseError("SOGT: trailing bytes", off + 8 * count);
  std::vector<double> data(count);
  for (std::size_t i = 0; i < count; ++i, off += 8)
    data[i] = std::bit_cast<double>(detail::get_le(bytes.data() + off, 8));
  return Tensor(std::move(shape), std::move(data));
}

inline void write_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ConfigError("cannot open for writing: " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw ConfigError("write failed: " + path);
}

inline std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open for reading: " + path, 0);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline void write_tensor(const std::string& path, const Tensor& t) {
  write_bytes(path, encode_tensor(t));
}

inline Tensor read_tensor(const std::string& path) {
  const auto bytes = read_bytes(path);
  return decode_tensor(bytes);
}

inline std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    s.push_back(digits[b >> 4]);
    s.push_back(digits[b & 0xF]);
  }
  return s;
}

inline std::vector<std::uint8_t> from_hex(const std::string& s) {
  auto nibble = [&](char c, std::size_t pos) -> std::uint8_t {
    if (c >= '0' && c <= '9') return static_cast<std::uint8_t>(c - '0');
    if (c >= 'a' && c <= 'f') return static_cast<std::uint8_t>(c - 'a' + 10);
    if (c >= 'A' && c <= 'F') return static_cast<std::uint8_t>(c - 'A' + 10);
    throw ParseError("invalid hex digit", pos);
  };
  if (s.size() % 2 != 0) throw ParseError("odd-length hex payload", s.size());
  std::vector<std::uint8_t> out(s.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<std::uint8_t>(nibble(s[2 * i], 2 * i) << 4 |
                                       nibble(s[2 * i + 1], 2 * i + 1));
  return out;
}

}  // namespace sog
