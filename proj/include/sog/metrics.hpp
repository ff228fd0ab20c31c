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
#include <map>
#include <set>
#include <string>
#include <utility>

#include "json.hpp"
#include "sog/grid.hpp"

namespace sog {

inline constexpr std::int32_t kVoidSegment = 0;

struct SegmentInfo {
  std::int32_t category = 0;
  bool isthing = false;
  friend bool operator==(const SegmentInfo&, const SegmentInfo&) = default;
};

/// Segment id raster plus the id -> (category, isthing) table. Id 0 is void.
struct PanopticMap {
  IdGrid ids;
  std::map<std::int32_t, SegmentInfo> segments;

  void validate() const {
    require(!segments.contains(kVoidSegment), "PanopticMap: segment id 0 is reserved for void");
    for (auto v : ids.values())
      if (v != kVoidSegment && !segments.contains(v))
        throw ConfigError("PanopticMap: pixel segment id " + std::to_string(v) +
                          " missing from the segment table");
  }
};

struct CategoryTally {
  double iou_sum = 0.0;
  std::size_t tp = 0, fp = 0, fn = 0;
  bool isthing = false;

  void merge(const CategoryTally& o) {
    iou_sum += o.iou_sum;
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    isthing = isthing || o.isthing;
  }
  bool present() const { return tp + fp + fn > 0; }
  double sq() const { return tp ? iou_sum / double(tp) : 0.0; }
  double rq() const {
    const double denom = double(tp) + 0.5 * double(fp) + 0.5 * double(fn);
    return denom > 0 ? double(tp) / denom : 0.0;
  }
  double pq() const {
    const double denom = double(tp) + 0.5 * double(fp) + 0.5 * double(fn);
    return denom > 0 ? iou_sum / denom : 0.0;
  }
};

struct PQSummary {
  double pq = 0.0, sq = 0.0, rq = 0.0;
  std::size_t n = 0;  // categories averaged
};

/// Per-category tallies; reducing over images is a per-category sum.
struct PQReport {
  std::map<std::int32_t, CategoryTally> categories;

  void merge(const PQReport& o) {
    for (const auto& [c, t] : o.categories) categories[c].merge(t);
  }

  // Unweighted class average over categories present in gt or prediction.
  // which: 0 all, 1 things only, 2 stuff only.
  PQSummary summary(int which = 0) const {
    PQSummary s;
    for (const auto& [c, t] : categories) {
      if (!t.present()) continue;
      if (which == 1 && !t.isthing) continue;
      if (which == 2 && t.isthing) continue;
      s.pq += t.pq();
      s.sq += t.sq();
      s.rq += t.rq();
      ++s.n;
    }
    if (s.n) {
      s.pq /= double(s.n);
      s.sq /= double(s.n);
      s.rq /= double(s.n);
    }
    return s;
  }
  PQSummary all() const { return summary(0); }
  PQSummary things() const { return summary(1); }
  PQSummary stuff() const { return summary(2); }
};

inline nlohmann::json to_json(const PQReport& r) {
  nlohmann::json j;
  auto agg = [](const PQSummary& s) {
    return nlohmann::json{{"pq", s.pq}, {"sq", s.sq}, {"rq", s.rq}, {"n", s.n}};
  };
  j["all"] = agg(r.all());
  j["things"] = agg(r.things());
  j["stuff"] = agg(r.stuff());
  auto& per = j["per_category"] = nlohmann::json::array();
  for (const auto& [c, t] : r.categories)
    per.push_back({{"category", c},
                   {"isthing", t.isthing},
                   {"iou_sum", t.iou_sum},
                   {"tp", t.tp},
                   {"fp", t.fp},
                   {"fn", t.fn}});
  return j;
}

/// Panoptic quality with category-aware matching at IoU > 0.5. Void gt pixels
/// are removed from unions, and predictions lying mostly on gt void are not
/// counted as false positives.
inline PQReport panoptic_quality(const PanopticMap& pred, const PanopticMap& gt) {
  require(pred.ids.height() == gt.ids.height() && pred.ids.width() == gt.ids.width(),
          "panoptic_quality: prediction and ground truth differ in size");
  pred.validate();
  gt.validate();

  std::map<std::int32_t, std::size_t> pred_area, gt_area;
  std::map<std::pair<std::int32_t, std::int32_t>, std::size_t> inter;
  for (std::size_t p = 0; p < gt.ids.size(); ++p) {
    const auto pi = pred.ids[p], gi = gt.ids[p];
    if (gi != kVoidSegment) ++gt_area[gi];
    if (pi != kVoidSegment) {
      ++pred_area[pi];
      ++inter[{pi, gi}];
    }
  }

  PQReport report;
  for (const auto& [id, info] : gt.segments)
    if (gt_area.contains(id)) report.categories[info.category].isthing |= info.isthing;
  for (const auto& [id, info] : pred.segments)
    if (pred_area.contains(id)) report.categories[info.category].isthing |= info.isthing;

  std::set<std::int32_t> matched_pred, matched_gt;
  for (const auto& [key, count] : inter) {
    const auto [pi, gi] = key;
    if (gi == kVoidSegment) continue;
    const auto& pinfo = pred.segments.at(pi);
    const auto& ginfo = gt.segments.at(gi);
    if (pinfo.category != ginfo.category) continue;
    const auto void_it = inter.find({pi, kVoidSegment});
    const std::size_t void_px = void_it == inter.end() ? 0 : void_it->second;
    const double uni = double(pred_area[pi]) + double(gt_area[gi]) - double(count) -
                       double(void_px);
    const double iou = double(count) / uni;
    if (iou > 0.5) {
      auto& t = report.categories[ginfo.category];
      ++t.tp;
      t.iou_sum += iou;
      matched_pred.insert(pi);
      matched_gt.insert(gi);
    }
  }
  for (const auto& [gi, a] : gt_area)
    if (!matched_gt.contains(gi)) ++report.categories[gt.segments.at(gi).category].fn;
  for (const auto& [pi, a] : pred_area) {
    if (matched_pred.contains(pi)) continue;
    const auto void_it = inter.find({pi, kVoidSegment});
    const std::size_t void_px = void_it == inter.end() ? 0 : void_it->second;
    if (double(void_px) / double(a) > 0.5) continue;
    ++report.categories[pred.segments.at(pi).category].fp;
  }
  return report;
}

}  // namespace sog
