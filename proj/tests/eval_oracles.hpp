#pragma once

// Exhaustive reference implementations of NMS and mAP used by the eval tests
// and the acceptance binary. They share no code with contextloc/eval.hpp
// beyond the Detection and LabeledInstance types.

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "contextloc/eval.hpp"

namespace oracle {

using contextloc::Detection;
using contextloc::Interval;
using contextloc::LabeledInstance;

inline double overlap(const Interval& a, const Interval& b) {
  const double lo = std::max(a.start, b.start), hi = std::min(a.end, b.end);
  if (hi <= lo) return 0.0;
  return (hi - lo) / (std::max(a.end, b.end) - std::min(a.start, b.start));
}

// Score descending, then earlier start, earlier end, smaller class id and
// smaller video id.
inline bool before(const Detection& a, const Detection& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.interval.start != b.interval.start) return a.interval.start < b.interval.start;
  if (a.interval.end != b.interval.end) return a.interval.end < b.interval.end;
  if (a.class_id != b.class_id) return a.class_id < b.class_id;
  return a.video_id < b.video_id;
}

inline bool same_group(const Detection& a, const Detection& b) {
  return a.video_id == b.video_id && a.class_id == b.class_id;
}

// The greedy NMS result is the unique subset S in which no member is
// suppressed by a higher ranked member of S and every non-member is. Every
// subset is tested; the function returns all subsets that qualify.
inline std::vector<std::vector<Detection>> nms_fixed_points(const std::vector<Detection>& dets, double thr) {
  std::vector<Detection> order = dets;
  std::sort(order.begin(), order.end(), before);
  const std::size_t n = order.size();
  std::vector<std::vector<Detection>> out;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      bool hit = false;
      for (std::size_t j = 0; j < i; ++j)
        if ((mask >> j & 1u) && same_group(order[i], order[j]) && overlap(order[i].interval, order[j].interval) > thr)
          hit = true;
      ok = (mask >> i & 1u) ? !hit : hit;
    }
    if (!ok) continue;
    std::vector<Detection> kept;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1u) kept.push_back(order[i]);
    out.push_back(kept);
  }
  return out;
}

// Matching by enumeration: over all partial injections from ranked detections
// to same-video ground truths with tIoU >= thr, pick the one whose sequence of
// (tIoU, -gt index) per detection is lexicographically largest. Unmatched
// detections rank below any match. Returns the TP flags in ranking order.
inline std::vector<bool> match(const std::vector<Detection>& ranked_dets, const std::vector<LabeledInstance>& gt,
                               double thr) {
  const std::size_t n = ranked_dets.size();
  using Key = std::vector<std::pair<double, int>>;
  Key best_key;
  std::vector<int> best_assign(n, -1);
  std::vector<int> assign(n, -1);
  std::vector<bool> used(gt.size(), false);
  bool have = false;

  auto recurse = [&](auto&& self, std::size_t i) -> void {
    if (i == n) {
      Key key;
      for (std::size_t k = 0; k < n; ++k)
        key.push_back(assign[k] < 0 ? std::pair<double, int>{-1.0, 0}
                                    : std::pair<double, int>{overlap(ranked_dets[k].interval, gt[assign[k]].interval),
                                                             -assign[k]});
      if (!have || key > best_key) {
        best_key = key;
        best_assign = assign;
        have = true;
      }
      return;
    }
    assign[i] = -1;
    self(self, i + 1);
    for (std::size_t g = 0; g < gt.size(); ++g) {
      if (used[g] || gt[g].video_id != ranked_dets[i].video_id) continue;
      if (overlap(ranked_dets[i].interval, gt[g].interval) < thr) continue;
      used[g] = true;
      assign[i] = static_cast<int>(g);
      self(self, i + 1);
      used[g] = false;
      assign[i] = -1;
    }
  };
  recurse(recurse, 0);
  std::vector<bool> tp(n);
  for (std::size_t k = 0; k < n; ++k) tp[k] = best_assign[k] >= 0;
  return tp;
}

// Interpolated AP as a sum over recall levels k/P of the best precision
// reached at recall >= k/P.
inline double ap_from_flags(const std::vector<bool>& tp, std::size_t positives) {
  if (positives == 0) return 0.0;
  double total = 0.0;
  for (std::size_t k = 1; k <= positives; ++k) {
    double best = 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < tp.size(); ++i) {
      hits += tp[i] ? 1 : 0;
      if (hits >= k) best = std::max(best, static_cast<double>(hits) / static_cast<double>(i + 1));
    }
    total += best;
  }
  return total / static_cast<double>(positives);
}

struct ClassAp {
  int class_id;
  double ap;
};

inline std::vector<ClassAp> per_class_ap(const std::vector<Detection>& dets, const std::vector<LabeledInstance>& gt,
                                         double thr) {
  std::map<int, std::pair<std::vector<Detection>, std::vector<LabeledInstance>>> by_class;
  for (const auto& g : gt) by_class[g.class_id].second.push_back(g);
  for (const auto& d : dets)
    if (by_class.count(d.class_id)) by_class[d.class_id].first.push_back(d);
  std::vector<ClassAp> out;
  for (auto& [c, pair] : by_class) {
    auto ranked_dets = pair.first;
    std::sort(ranked_dets.begin(), ranked_dets.end(), before);
    out.push_back({c, ap_from_flags(match(ranked_dets, pair.second, thr), pair.second.size())});
  }
  return out;
}

inline double mean_ap(const std::vector<Detection>& dets, const std::vector<LabeledInstance>& gt, double thr) {
  const auto aps = per_class_ap(dets, gt, thr);
  if (aps.empty()) return 0.0;
  double total = 0.0;
  for (const auto& a : aps) total += a.ap;
  return total / static_cast<double>(aps.size());
}

struct Instance {
  std::vector<Detection> detections;
  std::vector<LabeledInstance> ground_truth;
};

// Up to 3 videos, each with at most 5 detections and 3 ground truths over 2
// classes. Coordinates sit on a coarse grid so exact ties and touching
// intervals occur; scores come from a small set so equal scores occur too.
inline Instance random_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> videos(1, 3), ndet(0, 5), ngt(0, 3), cls(0, 1), pos(0, 8), len(1, 4), score(1, 6);
  Instance inst;
  const int nv = videos(rng);
  for (int v = 0; v < nv; ++v) {
    const std::string id = "v" + std::to_string(v);
    const int g = ngt(rng), d = ndet(rng);
    for (int k = 0; k < g; ++k) {
      const double s = pos(rng);
      inst.ground_truth.push_back({id, {s, s + len(rng)}, cls(rng)});
    }
    for (int k = 0; k < d; ++k) {
      const double s = pos(rng);
      inst.detections.push_back({id, {s, s + len(rng)}, cls(rng), score(rng) / 6.0});
    }
  }
  return inst;
}

inline bool same_detections(const std::vector<Detection>& a, const std::vector<Detection>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].video_id != b[i].video_id || a[i].class_id != b[i].class_id || a[i].score != b[i].score ||
        a[i].interval.start != b[i].interval.start || a[i].interval.end != b[i].interval.end)
      return false;
  }
  return true;
}

}  // namespace oracle
