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
#include <map>
#include <string>
#include <vector>

#include "sog/tensor.hpp"

namespace sog {

/// Named learnable tensors, each with a gradient accumulator and a momentum
/// buffer of the same shape. Iteration order is insertion order.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor momentum;
  };

  Entry& add(const std::string& name, Tensor value) {
    require(!index_.contains(name), "duplicate parameter name: " + name);
    index_[name] = entries_.size();
    Tensor grad(value.shape());
    Tensor mom(value.shape());
    entries_.push_back({name, std::move(value), std::move(grad), std::move(mom)});
    return entries_.back();
  }

  bool contains(const std::string& name) const { return index_.contains(name); }

  Entry& entry(const std::string& name) { return entries_[lookup(name)]; }
  const Entry& entry(const std::string& name) const {
    return entries_[lookup(name)];
  }

  const Tensor& value(const std::string& name) const { return entry(name).value; }
  Tensor& value(const std::string& name) { return entry(name).value; }
  Tensor& grad(const std::string& name) { return entry(name).grad; }
  const Tensor& grad(const std::string& name) const { return entry(name).grad; }

  std::vector<Entry>& entries() noexcept { return entries_; }
  const std::vector<Entry>& entries() const noexcept { return entries_; }

  void zero_grad() {
    for (auto& e : entries_) e.grad.fill(0.0);
  }

  // Adds a gradient contribution; shapes must agree.
  void accumulate(const std::string& name, const Tensor& g, double scale = 1.0) {
    axpy(grad(name), g, scale);
  }

 private:
  std::size_t lookup(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
    return it->second;
  }

  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

/// Rescales all gradients so their joint L2 norm is at most max_norm.
/// Returns the norm before clipping. max_norm <= 0 disables clipping.
inline double clip_grad_norm(ParamStore& store, double max_norm) {
  double sq = 0.0;
  for (const auto& e : store.entries())
    for (double g : e.grad.vec()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& e : store.entries())
      for (auto& g : e.grad.data()) g *= scale;
  }
  return norm;
}

struct SgdOptions {
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-4;
};

/// One SGD step with Nesterov momentum:
///   g' = g + wd * p;  v <- mu * v + g';  p <- p - lr * (g' + mu * v)
/// Gradient accumulators are zeroed afterwards.
inline void sgd_step(ParamStore& store, const SgdOptions& opt) {
  require(opt.lr >= 0.0, "sgd_step: lr must be non-negative");
  require(opt.momentum >= 0.0 && opt.momentum < 1.0,
          "sgd_step: momentum must lie in [0,1)");
  require(opt.weight_decay >= 0.0, "sgd_step: weight_decay must be >= 0");
  for (auto& e : store.entries()) {
    if (e.value.shape() != e.grad.shape() || e.value.shape() != e.momentum.shape())
      throw ConfigError("sgd_step: shape mismatch for parameter " + e.name);
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      const double g = e.grad[i] + opt.weight_decay * e.value[i];
      e.momentum[i] = opt.momentum * e.momentum[i] + g;
      e.value[i] -= opt.lr * (g + opt.momentum * e.momentum[i]);
    }
    e.grad.fill(0.0);
  }
}

}  // namespace sog
