#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "contextloc/datamodel.hpp"

namespace contextloc {

struct Detection {
  std::string video_id;
  Interval interval;
  int class_id = 0;
  double score = 0.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

/// Ground-truth instance tagged with its video, as consumed by mean_ap().
struct LabeledInstance {
  std::string video_id;
  Interval interval;
  int class_id = 0;
};

/// Temporal intersection over union; 0 for disjoint or degenerate pairs.
inline double tiou(const Interval& a, const Interval& b) {
  const double inter = std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
  const double uni = std::max(a.end, b.end) - std::min(a.start, b.start);
  if (inter <= 0.0 || uni <= 0.0) return 0.0;
  return inter / uni;
}

/// Ranking used by both NMS and AP: higher score first, then earlier start,
/// then the remaining fields, so the order never depends on input order.
inline bool ranks_before(const Detection& a, const Detection& b) {
  if (a.score != b.score) return a.score > b.score;
  return std::tie(a.interval.start, a.interval.end, a.class_id, a.video_id) <
         std::tie(b.interval.start, b.interval.end, b.class_id, b.video_id);
}

inline std::vector<Detection> ranked(std::vector<Detection> dets) {
  std::stable_sort(dets.begin(), dets.end(), ranks_before);
  return dets;
}

/// Greedy non-maximum suppression within each (video, class) group. A
/// detection is dropped when its tIoU with an already kept one exceeds the
/// threshold. Output is in ranking order.
inline std::vector<Detection> nms(const std::vector<Detection>& detections, double threshold) {
  std::vector<Detection> kept;
  for (const Detection& d : ranked(detections)) {
    bool suppressed = false;
    for (const Detection& k : kept) {
      if (k.video_id == d.video_id && k.class_id == d.class_id && tiou(k.interval, d.interval) > threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

/// Area under the precision-recall curve with the precision envelope
/// (precision at recall r is the maximum precision at any recall >= r).
/// Recall moves in steps of 1/P, so the area is the mean over the P recall
/// levels of the envelope precision where each level is first reached.
/// `is_tp` lists match outcomes in ranking order.
inline double interpolated_ap(const std::vector<bool>& is_tp, std::size_t num_positives) {
  if (num_positives == 0) return 0.0;
  const std::size_t n = is_tp.size();
  std::vector<double> prec(n);
  std::size_t tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    tp += is_tp[i] ? 1 : 0;
    prec[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
  }
  for (std::size_t i = n; i-- > 1;) prec[i - 1] = std::max(prec[i - 1], prec[i]);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (is_tp[i]) total += prec[i];
  return total / static_cast<double>(num_positives);
}

/// Average precision for one class at one tIoU threshold. Detections are
/// visited in ranking order and each claims the unmatched ground truth of the
/// same video with the highest tIoU (ties to the earlier instance), provided
/// that tIoU reaches the threshold.
inline double average_precision(const std::vector<Detection>& detections,
                                const std::vector<LabeledInstance>& ground_truth, double threshold) {
  std::map<std::string, std::vector<std::size_t>> gt_by_video;
  for (std::size_t g = 0; g < ground_truth.size(); ++g) gt_by_video[ground_truth[g].video_id].push_back(g);
  std::vector<bool> used(ground_truth.size(), false);
  std::vector<bool> is_tp;
  for (const Detection& d : ranked(detections)) {
    std::size_t best = ground_truth.size();
    double best_iou = -1.0;
    if (auto it = gt_by_video.find(d.video_id); it != gt_by_video.end()) {
      for (std::size_t g : it->second) {
        if (used[g]) continue;
        const double iou = tiou(d.interval, ground_truth[g].interval);
        if (iou >= threshold && iou > best_iou) {
          best = g;
          best_iou = iou;
        }
      }
    }
    if (best < ground_truth.size()) used[best] = true;
    is_tp.push_back(best < ground_truth.size());
  }
  return interpolated_ap(is_tp, ground_truth.size());
}

struct MapReport {
  std::vector<double> thresholds;
  std::vector<int> classes;                  // classes with at least one instance
  std::vector<std::vector<double>> ap;       // [threshold][class index]
  std::vector<double> map;                   // per threshold
  double average = 0.0;                      // mean of map over thresholds
};

/// mAP per threshold, averaged over classes that have ground truth.
inline MapReport mean_ap(const std::vector<Detection>& detections, const std::vector<LabeledInstance>& ground_truth,
                         const std::vector<double>& thresholds) {
  MapReport report;
  report.thresholds = thresholds;
  std::map<int, std::vector<LabeledInstance>> gt_by_class;
  for (const auto& g : ground_truth) gt_by_class[g.class_id].push_back(g);
  std::map<int, std::vector<Detection>> det_by_class;
  for (const auto& d : detections) det_by_class[d.class_id].push_back(d);
  for (const auto& [c, _] : gt_by_class) report.classes.push_back(c);

  for (double thr : thresholds) {
    std::vector<double> per_class;
    double acc = 0.0;
    for (int c : report.classes) {
      const double ap = average_precision(det_by_class[c], gt_by_class[c], thr);
      per_class.push_back(ap);
      acc += ap;
    }
    report.ap.push_back(per_class);
    report.map.push_back(report.classes.empty() ? 0.0 : acc / static_cast<double>(report.classes.size()));
  }
  double total = 0.0;
  for (double m : report.map) total += m;
  report.average = thresholds.empty() ? 0.0 : total / static_cast<double>(thresholds.size());
  return report;
}

/// Throws ContractError when a detection or ground truth uses a class id
/// outside [0, num_classes).
inline void validate_class_ids(const std::vector<Detection>& detections,
                               const std::vector<LabeledInstance>& ground_truth, int num_classes) {
  auto check = [&](int c, const std::string& video, const char* what) {
    if (c < 0 || c >= num_classes) {
      throw ContractError(std::string(what) + " in video " + video + " has unknown class id " + std::to_string(c) +
                          " (expected 0.." + std::to_string(num_classes - 1) + ")");
    }
  };
  for (const auto& d : detections) check(d.class_id, d.video_id, "detection");
  for (const auto& g : ground_truth) check(g.class_id, g.video_id, "ground truth");
}

/// {0.3, 0.4, 0.5, 0.6, 0.7}
inline std::vector<double> thumos_thresholds() { return {0.3, 0.4, 0.5, 0.6, 0.7}; }

/// 0.5:0.05:0.95
inline std::vector<double> activitynet_thresholds() {
  std::vector<double> t;
  for (int i = 0; i <= 9; ++i) t.push_back(0.5 + 0.05 * i);
  return t;
}

}  // namespace contextloc
