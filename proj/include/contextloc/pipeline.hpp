#pragma once

#include <algorithm>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "contextloc/config.hpp"
#include "contextloc/dataset.hpp"
#include "contextloc/infer.hpp"
#include "contextloc/numerics/gradcheck.hpp"
#include "contextloc/random.hpp"
#include "contextloc/synthetic.hpp"
#include "contextloc/train.hpp"

namespace contextloc {

// ---------------------------------------------------------------------------
// Gradient check of the full model loss.

struct GradcheckOptions {
  int snippets = 5;
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Instances whose ReLU / smooth-L1 inputs come closer than this to a kink
  /// are re-sampled.
  double min_kink_margin = 1e-3;
  int max_attempts = 50;
  bool corrupt_gradient = false;
};

struct GradcheckGroup {
  std::string name;
  double max_rel_error = 0.0;
};

struct GradcheckResult {
  std::vector<GradcheckGroup> groups;
  double max_rel_error = 0.0;
  bool finite = true;
  bool passed = false;
  int attempts = 0;
  double kink_margin = 0.0;
};

/// A single 5-snippet video with two overlapping proposals, one of them
/// matching the ground truth, so every loss term is active.
template <typename T>
Dataset<T> gradcheck_instance(int dim, int classes, int snippets, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Dataset<T> d;
  d.num_classes = classes;
  VideoRecord<T> v;
  v.features.video_id = "gradcheck";
  v.features.snippet_duration = 1.0;
  v.features.snippets = Matrix<T>(static_cast<std::size_t>(snippets), static_cast<std::size_t>(dim));
  for (auto& x : v.features.snippets.data()) x = static_cast<T>(normal(rng));
  const double n = snippets;
  v.ground_truth.push_back({{0.2 * n, 0.6 * n}, 0});
  v.proposals.push_back({{0.2 * n, 0.6 * n}, 0.9});
  v.proposals.push_back({{0.4 * n, 0.9 * n}, 0.5});
  d.videos.push_back(std::move(v));
  return d;
}

/// Central-difference check over every parameter of the model built from
/// `config`, reported per group (lnet, gnet, pnet_original, pnet_extended,
/// head). Requires feature_dim <= 16 and 64-bit arithmetic to be meaningful.
inline GradcheckResult gradcheck(const Config& config, const GradcheckOptions& opt = {}) {
  using T = double;
  if (config.model.feature_dim > 16) throw ConfigError("gradcheck requires feature_dim <= 16");
  GradcheckResult result;
  auto rng = seeded_engine(config.seed, 77);
  for (int attempt = 1; attempt <= opt.max_attempts; ++attempt) {
    result.attempts = attempt;
    const Dataset<T> data = gradcheck_instance<T>(config.model.feature_dim, config.model.num_classes, opt.snippets, rng);
    Model<T> model(config.model, rng());
    const auto pv = prepare_video(data.videos[0].features, data.videos[0].proposals, config.model.theta_near);
    const auto targets = assign_targets(data.videos[0].proposals, data.videos[0].ground_truth,
                                        config.model.num_classes, config.heads.fg_tiou, config.heads.complete_tiou);
    auto build = [&](Tape<T>& tape) { return batch_loss<T>(tape, model, {&pv}, {&targets}, config.heads); };
    Tape<T>::Options topt;
    topt.corrupt_matmul_grad = opt.corrupt_gradient;
    const auto report = finite_diff_check<T>(build, model.parameters(), opt.step, topt);
    result.kink_margin = report.min_kink_margin;
    if (report.min_kink_margin < opt.min_kink_margin && attempt < opt.max_attempts) continue;

    std::map<std::string, double> groups;
    std::vector<std::string> order;
    for (const auto& e : report.per_parameter) {
      const std::string g = e.name.substr(0, e.name.find('.'));
      if (!groups.count(g)) order.push_back(g);
      groups[g] = std::max(groups[g], e.max_rel_error);
    }
    for (const auto& g : order) result.groups.push_back({g, groups[g]});
    result.finite = report.finite;
    result.max_rel_error = report.max_rel_error;
    result.passed = report.passed(opt.tolerance);
    return result;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Ablation over the context networks.

struct AblationVariant {
  std::string name;
  bool use_lnet;
  bool use_gnet;
};

inline std::vector<AblationVariant> ablation_variants() {
  return {{"pnet_only", false, false}, {"lnet+pnet", true, false}, {"gnet+pnet", false, true}, {"full", true, true}};
}

struct AblationRow {
  std::string variant;
  std::uint64_t seed = 0;
  double map_at_05 = 0.0;
  double average_map = 0.0;
  double test_accuracy = 0.0;
};

/// Train on videos [0, num_videos) and evaluate on the next `test_videos`
/// videos generated from the same seed.
template <typename T>
AblationRow evaluate_variant(Config config, const AblationVariant& variant, int test_videos) {
  config.model.use_lnet = variant.use_lnet;
  config.model.use_gnet = variant.use_gnet;
  const Dataset<T> train_data = generate_synthetic<T>(config);
  Config test_cfg = config;
  test_cfg.synthetic.first_video = config.synthetic.first_video + config.synthetic.num_videos;
  test_cfg.synthetic.num_videos = test_videos;
  const Dataset<T> test_data = generate_synthetic<T>(test_cfg);

  auto trained = train<T>(config, train_data);
  Model<T>& model = trained.checkpoint.model;
  InferenceConfig icfg = config.inference;
  icfg.stream = Stream::rgb;
  const auto dets = flatten(infer(model, test_data, icfg, config.heads));
  const auto gt = test_data.labeled_ground_truth();
  AblationRow row;
  row.variant = variant.name;
  row.seed = config.seed;
  row.map_at_05 = mean_ap(dets, gt, {0.5}).map[0];
  row.average_map = mean_ap(dets, gt, config.eval_thresholds).average;
  row.test_accuracy = classification_accuracy(model, test_data, config);
  return row;
}

inline std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os.precision(10);
  os << "variant,seed,map@0.5,average_map,test_accuracy\n";
  for (const auto& r : rows)
    os << r.variant << "," << r.seed << "," << r.map_at_05 << "," << r.average_map << "," << r.test_accuracy << "\n";
  return os.str();
}

}  // namespace contextloc
