#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <random>
#include <vector>

#include "contextloc/config.hpp"
#include "contextloc/context_nets.hpp"
#include "contextloc/datamodel.hpp"
#include "contextloc/eval.hpp"
#include "contextloc/numerics/tape.hpp"

namespace contextloc {

/// Classification (C actions + background) on the original proposal's
/// feature, completeness (C) and class-wise boundary regression (2C) on the
/// extended proposal's feature. All three are affine with bias.
template <typename T>
struct HeadParams {
  Parameter<T> cls_w, cls_b;
  Parameter<T> comp_w, comp_b;
  Parameter<T> reg_w, reg_b;

  static HeadParams init(std::size_t cls_in, std::size_t ext_in, std::size_t classes, std::mt19937_64& rng) {
    HeadParams h;
    h.cls_w = init_weight<T>("head.cls_w", classes + 1, cls_in, rng);
    h.cls_b = Parameter<T>("head.cls_b", Matrix<T>(classes + 1, 1));
    h.comp_w = init_weight<T>("head.comp_w", classes, ext_in, rng);
    h.comp_b = Parameter<T>("head.comp_b", Matrix<T>(classes, 1));
    h.reg_w = init_weight<T>("head.reg_w", 2 * classes, ext_in, rng);
    h.reg_b = Parameter<T>("head.reg_b", Matrix<T>(2 * classes, 1));
    return h;
  }

  std::vector<Parameter<T>*> parameters() { return {&cls_w, &cls_b, &comp_w, &comp_b, &reg_w, &reg_b}; }
};

template <typename T>
struct HeadOutputs {
  Var<T> cls_logits;  // C+1
  Var<T> comp;        // C, raw margins
  Var<T> reg;         // 2C: (center offset, log-length offset) per class
};

namespace ad {

template <typename T>
Var<T> affine(Parameter<T>& w, Parameter<T>& b, Var<T> x) {
  Tape<T>& t = *x.tape;
  return add(matmul(t.parameter(w), x), t.parameter(b));
}

template <typename T>
HeadOutputs<T> heads_forward(HeadParams<T>& h, Var<T> original_feature, Var<T> extended_feature) {
  return {affine(h.cls_w, h.cls_b, original_feature), affine(h.comp_w, h.comp_b, extended_feature),
          affine(h.reg_w, h.reg_b, extended_feature)};
}

}  // namespace ad

/// Training labels of one proposal. `label == num_classes` is background.
struct ProposalTarget {
  int label = 0;
  double best_tiou = 0.0;
  int completeness = -1;  // +1 / -1, foreground only
  double delta_center = 0.0;
  double delta_log_length = 0.0;

  bool foreground(int num_classes) const { return label < num_classes; }
};

/// (center offset / proposal length, log(gt length / proposal length)).
inline std::pair<double, double> encode_regression(const Interval& proposal, const Interval& gt) {
  return {(gt.center() - proposal.center()) / proposal.duration(), std::log(gt.duration() / proposal.duration())};
}

/// Inverse of encode_regression, clamped to [0, video_end]. The result always
/// has positive length.
inline Interval apply_regression(const Interval& proposal, double delta_center, double delta_log_length,
                                 double video_end) {
  const double pd = proposal.duration();
  const double center = proposal.center() + delta_center * pd;
  const double length = pd * std::exp(delta_log_length);
  Interval out{center - 0.5 * length, center + 0.5 * length};
  out.start = std::clamp(out.start, 0.0, video_end);
  out.end = std::clamp(out.end, 0.0, video_end);
  if (!(out.end > out.start)) {
    const double width = std::min(1e-6, video_end);
    const double c = std::clamp(center, 0.5 * width, video_end - 0.5 * width);
    out = {c - 0.5 * width, c + 0.5 * width};
  }
  return out;
}

/// Labels each proposal from its best-overlapping ground truth (earliest wins
/// ties): foreground when tIoU >= fg_tiou, complete when tIoU >= complete_tiou.
inline std::vector<ProposalTarget> assign_targets(const std::vector<Proposal>& proposals,
                                                  const std::vector<GroundTruthInstance>& ground_truth,
                                                  int num_classes, double fg_tiou = 0.5,
                                                  double complete_tiou = 0.7) {
  std::vector<ProposalTarget> out;
  out.reserve(proposals.size());
  for (const Proposal& p : proposals) {
    ProposalTarget t;
    t.label = num_classes;
    std::size_t best = ground_truth.size();
    for (std::size_t g = 0; g < ground_truth.size(); ++g) {
      const double iou = tiou(p.interval, ground_truth[g].interval);
      if (iou > t.best_tiou) {
        t.best_tiou = iou;
        best = g;
      }
    }
    if (best < ground_truth.size() && t.best_tiou >= fg_tiou) {
      t.label = ground_truth[best].class_id;
      t.completeness = t.best_tiou >= complete_tiou ? 1 : -1;
      std::tie(t.delta_center, t.delta_log_length) = encode_regression(p.interval, ground_truth[best].interval);
    }
    out.push_back(t);
  }
  return out;
}

template <typename T>
struct LossTerms {
  Var<T> total;
  Var<T> cls;   // mean cross-entropy over all proposals
  Var<T> comp;  // mean hinge over foreground proposals
  Var<T> reg;   // mean smooth-L1 over foreground proposals
};

/// cls + lambda_comp * comp + lambda_reg * reg. Terms with no contributing
/// proposals are zero.
template <typename T>
LossTerms<T> total_loss(Tape<T>& tape, const std::vector<HeadOutputs<T>>& outputs,
                        const std::vector<ProposalTarget>& targets, int num_classes, double lambda_comp = 0.5,
                        double lambda_reg = 0.5) {
  if (outputs.empty()) throw ContractError("total_loss: empty batch");
  if (outputs.size() != targets.size()) throw DimensionError("total_loss: outputs and targets differ in length");
  std::vector<Var<T>> ce, hinge, reg;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const ProposalTarget& tg = targets[i];
    ce.push_back(ad::cross_entropy(outputs[i].cls_logits, static_cast<std::size_t>(tg.label)));
    if (!tg.foreground(num_classes)) continue;
    const std::size_t c = static_cast<std::size_t>(tg.label);
    const Var<T> margin = ad::scale(ad::element(outputs[i].comp, c), static_cast<T>(tg.completeness));
    hinge.push_back(ad::relu(ad::sub(tape.constant(Matrix<T>::scalar(T(1))), margin)));
    const Var<T> target = tape.constant(Matrix<T>::column(
        {static_cast<T>(tg.delta_center), static_cast<T>(tg.delta_log_length)}));
    reg.push_back(ad::smooth_l1(ad::sub(ad::slice(outputs[i].reg, 2 * c, 2), target)));
  }
  LossTerms<T> terms;
  terms.cls = ad::mean(tape, ce);
  terms.comp = ad::mean(tape, hinge);
  terms.reg = ad::mean(tape, reg);
  terms.total = ad::add(ad::add(terms.cls, ad::scale(terms.comp, static_cast<T>(lambda_comp))),
                        ad::scale(terms.reg, static_cast<T>(lambda_reg)));
  return terms;
}

template <typename T>
std::vector<T> softmax(const std::vector<T>& logits) {
  const T mx = *std::max_element(logits.begin(), logits.end());
  std::vector<T> out(logits.size());
  T z = T(0);
  for (std::size_t i = 0; i < logits.size(); ++i) z += (out[i] = std::exp(logits[i] - mx));
  for (auto& v : out) v /= z;
  return out;
}

template <typename T>
std::vector<T> sigmoid(const std::vector<T>& x) {
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = T(1) / (T(1) + std::exp(-x[i]));
  return out;
}

/// score_c = cls_softmax[c] * comp_sigmoid[c]; the trailing background entry
/// of cls_softmax is dropped.
template <typename T>
std::vector<T> fuse_scores(const std::vector<T>& cls_softmax, const std::vector<T>& comp_sigmoid) {
  if (cls_softmax.size() != comp_sigmoid.size() + 1) {
    throw DimensionError("fuse_scores: expected C+1 class probabilities for C completeness scores");
  }
  std::vector<T> out(comp_sigmoid.size());
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = cls_softmax[c] * comp_sigmoid[c];
  return out;
}

/// (w_rgb * rgb + w_flow * flow) / (w_rgb + w_flow); the default ratio is 5:6.
template <typename T>
std::vector<T> fuse_streams(const std::vector<T>& rgb, const std::vector<T>& flow, double w_rgb = 5.0,
                            double w_flow = 6.0) {
  if (rgb.size() != flow.size()) throw DimensionError("fuse_streams: stream score lengths differ");
  std::vector<T> out(rgb.size());
  const double total = w_rgb + w_flow;
  for (std::size_t i = 0; i < rgb.size(); ++i) {
    out[i] = static_cast<T>((w_rgb * static_cast<double>(rgb[i]) + w_flow * static_cast<double>(flow[i])) / total);
  }
  return out;
}

}  // namespace contextloc
