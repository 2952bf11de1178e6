#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "contextloc/config.hpp"
#include "contextloc/dataset.hpp"
#include "contextloc/eval.hpp"
#include "contextloc/heads.hpp"
#include "contextloc/io.hpp"
#include "contextloc/model.hpp"

namespace contextloc {

/// Per-proposal predictions of one stream before decoding.
struct ProposalPrediction {
  std::vector<double> scores;        // C, classification x completeness
  std::vector<double> delta_center;  // C
  std::vector<double> delta_length;  // C
};

template <typename T>
std::vector<ProposalPrediction> predict_video(Model<T>& model, const VideoFeatures<T>& video,
                                              const std::vector<Proposal>& proposals) {
  std::vector<ProposalPrediction> out;
  if (proposals.empty()) return out;
  if (static_cast<int>(video.dim()) != model.config().feature_dim) {
    throw ConfigError("video " + video.video_id + " has feature dimension " + std::to_string(video.dim()) +
                      ", checkpoint expects " + std::to_string(model.config().feature_dim));
  }
  const auto pv = prepare_video(video, proposals, model.config().theta_near);
  Tape<T> tape;
  const auto heads = model.forward(tape, pv);
  const std::size_t classes = static_cast<std::size_t>(model.config().num_classes);
  for (const auto& h : heads) {
    const std::vector<T> fused = fuse_scores(softmax(h.cls_logits.value().data()), sigmoid(h.comp.value().data()));
    ProposalPrediction p;
    const auto& reg = h.reg.value();
    for (std::size_t c = 0; c < classes; ++c) {
      p.scores.push_back(static_cast<double>(fused[c]));
      p.delta_center.push_back(static_cast<double>(reg[2 * c]));
      p.delta_length.push_back(static_cast<double>(reg[2 * c + 1]));
    }
    out.push_back(std::move(p));
  }
  return out;
}

/// Weighted combination of two streams' predictions; scores and offsets use
/// the same ratio.
inline std::vector<ProposalPrediction> fuse_predictions(const std::vector<ProposalPrediction>& rgb,
                                                        const std::vector<ProposalPrediction>& flow, double w_rgb,
                                                        double w_flow) {
  if (rgb.size() != flow.size()) throw DimensionError("fuse_predictions: streams cover different proposals");
  std::vector<ProposalPrediction> out(rgb.size());
  for (std::size_t i = 0; i < rgb.size(); ++i) {
    out[i].scores = fuse_streams(rgb[i].scores, flow[i].scores, w_rgb, w_flow);
    out[i].delta_center = fuse_streams(rgb[i].delta_center, flow[i].delta_center, w_rgb, w_flow);
    out[i].delta_length = fuse_streams(rgb[i].delta_length, flow[i].delta_length, w_rgb, w_flow);
  }
  return out;
}

/// Decodes predictions into detections: one per (proposal, class) with the
/// class-specific refined interval, class-wise NMS, then the best
/// `max_detections` by score.
inline std::vector<Detection> decode_detections(const std::string& video_id, double video_end,
                                                const std::vector<Proposal>& proposals,
                                                const std::vector<ProposalPrediction>& preds,
                                                const InferenceConfig& cfg) {
  std::vector<Detection> raw;
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    for (std::size_t c = 0; c < preds[i].scores.size(); ++c) {
      raw.push_back({video_id,
                     apply_regression(proposals[i].interval, preds[i].delta_center[c], preds[i].delta_length[c],
                                      video_end),
                     static_cast<int>(c), preds[i].scores[c]});
    }
  }
  std::vector<Detection> kept = nms(raw, cfg.nms_tiou);
  if (kept.size() > static_cast<std::size_t>(cfg.max_detections)) kept.resize(static_cast<std::size_t>(cfg.max_detections));
  return kept;
}

/// Full inference over a dataset. `flow` supplies the second stream for
/// Stream::both (model and features); for Stream::flow it replaces the first.
template <typename T>
std::vector<VideoDetections> infer(Model<T>& model, const Dataset<T>& data, const InferenceConfig& cfg,
                                   const HeadConfig& heads, Model<T>* flow_model = nullptr,
                                   const Dataset<T>* flow_data = nullptr) {
  if (cfg.stream != Stream::rgb && flow_model == nullptr) flow_model = &model;
  if (cfg.stream != Stream::rgb && flow_data == nullptr) flow_data = &data;
  if (flow_data && flow_data->videos.size() != data.videos.size()) {
    throw ConfigError("flow features cover a different set of videos");
  }
  std::vector<VideoDetections> out;
  for (std::size_t v = 0; v < data.videos.size(); ++v) {
    const auto& rec = data.videos[v];
    std::vector<ProposalPrediction> preds;
    if (cfg.stream == Stream::rgb) {
      preds = predict_video(model, rec.features, rec.proposals);
    } else if (cfg.stream == Stream::flow) {
      preds = predict_video(*flow_model, flow_data->videos[v].features, rec.proposals);
    } else {
      preds = fuse_predictions(predict_video(model, rec.features, rec.proposals),
                               predict_video(*flow_model, flow_data->videos[v].features, rec.proposals),
                               heads.fusion_rgb, heads.fusion_flow);
    }
    out.push_back({rec.features.video_id, rec.features.duration(),
                   decode_detections(rec.features.video_id, rec.features.duration(), rec.proposals, preds, cfg)});
  }
  return out;
}

inline std::vector<Detection> flatten(const std::vector<VideoDetections>& videos) {
  std::vector<Detection> out;
  for (const auto& v : videos) out.insert(out.end(), v.detections.begin(), v.detections.end());
  return out;
}

inline std::vector<LabeledInstance> flatten(const std::vector<VideoGroundTruth>& videos) {
  std::vector<LabeledInstance> out;
  for (const auto& v : videos)
    for (const auto& g : v.instances) out.push_back({v.video_id, g.interval, g.class_id});
  return out;
}

/// threshold,map rows followed by an "average" row.
inline std::string map_csv(const MapReport& r) {
  std::ostringstream os;
  os.precision(10);
  os << "threshold,map\n";
  for (std::size_t t = 0; t < r.thresholds.size(); ++t) os << r.thresholds[t] << "," << r.map[t] << "\n";
  os << "average," << r.average << "\n";
  return os.str();
}

inline std::string per_class_csv(const MapReport& r) {
  std::ostringstream os;
  os.precision(10);
  os << "threshold,class,ap\n";
  for (std::size_t t = 0; t < r.thresholds.size(); ++t)
    for (std::size_t c = 0; c < r.classes.size(); ++c)
      os << r.thresholds[t] << "," << r.classes[c] << "," << r.ap[t][c] << "\n";
  return os.str();
}

}  // namespace contextloc
