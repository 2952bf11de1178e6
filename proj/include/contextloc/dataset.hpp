#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "contextloc/datamodel.hpp"
#include "contextloc/error.hpp"
#include "contextloc/eval.hpp"
#include "contextloc/io.hpp"

namespace contextloc {

template <typename T>
struct VideoRecord {
  VideoFeatures<T> features;
  std::vector<GroundTruthInstance> ground_truth;
  std::vector<Proposal> proposals;
};

template <typename T>
struct Dataset {
  int num_classes = 0;
  std::vector<VideoRecord<T>> videos;

  std::vector<LabeledInstance> labeled_ground_truth() const {
    std::vector<LabeledInstance> out;
    for (const auto& v : videos)
      for (const auto& g : v.ground_truth) out.push_back({v.features.video_id, g.interval, g.class_id});
    return out;
  }
};

/// Layout of a dataset directory:
///   features/<video_id>.ctxl   feature files
///   ground_truth.json          array of per-video ground truth objects
///   proposals.json             array of per-video proposal objects
template <typename T>
void save_dataset(const Dataset<T>& data, const std::filesystem::path& dir) {
  std::vector<VideoGroundTruth> gt;
  std::vector<VideoProposals> props;
  for (const auto& v : data.videos) {
    save_features(v.features, dir / "features" / (v.features.video_id + ".ctxl"));
    gt.push_back({v.features.video_id, v.features.duration(), v.ground_truth});
    props.push_back({v.features.video_id, v.features.duration(), v.proposals});
  }
  write_text(dir / "ground_truth.json", dump_json_array(gt));
  write_text(dir / "proposals.json", dump_json_array(props));
}

/// Loads a dataset directory. `num_classes` of 0 means one more than the
/// largest class id in the ground truth.
template <typename T>
Dataset<T> load_dataset(const std::filesystem::path& dir, int num_classes = 0) {
  const auto gt = parse_ground_truth(read_text(dir / "ground_truth.json"), (dir / "ground_truth.json").string());
  const auto props = parse_proposals(read_text(dir / "proposals.json"), (dir / "proposals.json").string());
  std::map<std::string, const VideoGroundTruth*> gt_by_id;
  for (const auto& g : gt) gt_by_id[g.video_id] = &g;

  Dataset<T> data;
  int max_class = -1;
  for (const auto& p : props) {
    VideoRecord<T> rec;
    rec.features = load_features<T>(dir / "features" / (p.video_id + ".ctxl"));
    rec.features.video_id = p.video_id;
    rec.features.snippet_duration = p.duration / static_cast<double>(rec.features.num_snippets());
    rec.proposals = p.proposals;
    if (auto it = gt_by_id.find(p.video_id); it != gt_by_id.end()) rec.ground_truth = it->second->instances;
    for (const auto& g : rec.ground_truth) {
      if (g.class_id < 0) throw ParseError("negative class id in video " + p.video_id);
      max_class = std::max(max_class, g.class_id);
    }
    data.videos.push_back(std::move(rec));
  }
  data.num_classes = num_classes > 0 ? num_classes : max_class + 1;
  if (max_class >= data.num_classes) {
    throw ParseError("ground truth class " + std::to_string(max_class) + " exceeds num_classes " +
                     std::to_string(data.num_classes));
  }
  return data;
}

}  // namespace contextloc
