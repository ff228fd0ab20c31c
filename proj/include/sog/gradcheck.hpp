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
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "sog/params.hpp"
#include "sog/rng.hpp"

namespace sog {

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t probed = 0;
  std::size_t skipped = 0;  // coordinates whose probe straddled a kink
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  bool pass = true;
  // Set on a non-finite probe or a gradient mismatch.
  std::optional<std::string> failure;

  double max_rel_error() const {
    double m = 0.0;
    for (const auto& e : entries) m = std::max(m, e.max_rel_error);
    return m;
  }
};

struct GradCheckOptions {
  double eps = 1e-3;
  double tol = 1e-4;
  // Parameters larger than this are checked on a random coordinate subset.
  std::size_t full_check_limit = 512;
  std::size_t subsample = 256;
  std::uint64_t seed = 0;
  // Skip coordinates where the forward and backward one-sided slopes disagree
  // by more than kink_tol (relative): the loss is not smooth within eps there.
  bool skip_kinks = false;
  double kink_tol = 1e-2;
};

inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

/// Compares the gradients already stored in `store` against central
/// differences of `loss`. The store is perturbed in place and restored.
inline GradCheckReport finite_diff_check(
    const std::function<double(const ParamStore&)>& loss, ParamStore& store,
    const GradCheckOptions& opt = {}) {
  require(opt.eps > 0.0, "finite_diff_check: eps must be positive");
  GradCheckReport report;
  Rng rng(opt.seed);
  const double base = opt.skip_kinks ? loss(store) : 0.0;
  for (auto& e : store.entries()) {
    GradCheckEntry ge{e.name};
    std::vector<std::size_t> coords(e.value.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > opt.full_check_limit) {
      rng.shuffle(coords);
      coords.resize(opt.subsample);
      std::sort(coords.begin(), coords.end());
    }
    for (std::size_t idx : coords) {
      const double orig = e.value[idx];
      e.value[idx] = orig + opt.eps;
      const double lp = loss(store);
      e.value[idx] = orig - opt.eps;
      const double lm = loss(store);
      e.value[idx] = orig;
      if (!std::isfinite(lp) || !std::isfinite(lm)) {
        report.pass = false;
        report.failure = "non-finite loss probing " + e.name + "[" +
                         std::to_string(idx) + "]";
        ge.max_rel_error = INFINITY;
        ge.worst_index = idx;
        report.entries.push_back(ge);
        return report;
      }
      if (opt.skip_kinks &&
          relative_error((lp - base) / opt.eps, (base - lm) / opt.eps) > opt.kink_tol) {
        ++ge.skipped;
        continue;
      }
      const double numeric = (lp - lm) / (2.0 * opt.eps);
      const double err = relative_error(e.grad[idx], numeric);
      if (err > ge.max_rel_error) {
        ge.max_rel_error = err;
        ge.worst_index = idx;
      }
      ++ge.probed;
    }
    if (ge.max_rel_error > opt.tol && report.pass) {
      report.pass = false;
      report.failure = "gradient mismatch on " + e.name + "[" + std::to_string(ge.worst_index) +
                       "], relative error " + std::to_string(ge.max_rel_error);
    }
    report.entries.push_back(ge);
  }
  return report;
}

}  // namespace sog
