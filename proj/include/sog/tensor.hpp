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

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sog/error.hpp"

namespace sog {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

/// Dense row-major array of doubles.
///
/// Extents are positive except that a leading extent of zero is allowed so
/// that empty instance stacks (N = 0) stay representable.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

  Tensor(Shape shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    require(data_.size() == shape_size(shape_),
            "tensor data length " + std::to_string(data_.size()) +
                " does not match shape " + shape_str(shape_));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& vec() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  const double& operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  const double& at(std::size_t i, std::size_t j) const {
    return data_[i * shape_[1] + j];
  }
  double& at(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  const double& at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

inline void require_shape(const Tensor& t, const Shape& expected,
                          const std::string& what) {
  if (t.shape() != expected)
    throw ConfigError(what + ": expected shape " + shape_str(expected) +
                      ", got " + shape_str(t.shape()));
}

inline void require_rank(const Tensor& t, std::size_t rank,
                         const std::string& what) {
  if (t.rank() != rank)
    throw ConfigError(what + ": expected rank " + std::to_string(rank) +
                      ", got shape " + shape_str(t.shape()));
}

// a += scale * b
inline void axpy(Tensor& a, const Tensor& b, double scale = 1.0) {
  require(a.shape() == b.shape(), "axpy: shape mismatch " +
                                      shape_str(a.shape()) + " vs " +
                                      shape_str(b.shape()));
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += scale * b[i];
}

inline Tensor transpose(const Tensor& m) {
  require_rank(m, 2, "transpose");
  Tensor out({m.dim(1), m.dim(0)});
  for (std::size_t i = 0; i < m.dim(0); ++i)
    for (std::size_t j = 0; j < m.dim(1); ++j) out.at(j, i) = m.at(i, j);
  return out;
}

// (n x k) * (k x m)
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul lhs");
  require_rank(b, 2, "matmul rhs");
  require(a.dim(1) == b.dim(0), "matmul: inner dimension mismatch " +
                                    shape_str(a.shape()) + " x " +
                                    shape_str(b.shape()));
  const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  Tensor out({n, m});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a.at(i, p);
      if (av == 0.0) continue;
      for (std::size_t j = 0; j < m; ++j) out.at(i, j) += av * b.at(p, j);
    }
  return out;
}

// aᵀ * b for a (k x n), b (k x m)
inline Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul_tn lhs");
  require_rank(b, 2, "matmul_tn rhs");
  require(a.dim(0) == b.dim(0), "matmul_tn: leading dimension mismatch");
  const std::size_t k = a.dim(0), n = a.dim(1), m = b.dim(1);
  Tensor out({n, m});
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t i = 0; i < n; ++i) {
      const double av = a.at(p, i);
      if (av == 0.0) continue;
      for (std::size_t j = 0; j < m; ++j) out.at(i, j) += av * b.at(p, j);
    }
  return out;
}

// a * bᵀ for a (n x k), b (m x k)
inline Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul_nt lhs");
  require_rank(b, 2, "matmul_nt rhs");
  require(a.dim(1) == b.dim(1), "matmul_nt: trailing dimension mismatch");
  const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(0);
  Tensor out({n, m});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a.at(i, p) * b.at(j, p);
      out.at(i, j) = s;
    }
  return out;
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

}  // namespace sog
