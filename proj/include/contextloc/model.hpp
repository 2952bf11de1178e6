#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "contextloc/config.hpp"
#include "contextloc/context_nets.hpp"
#include "contextloc/datamodel.hpp"
#include "contextloc/heads.hpp"
#include "contextloc/numerics/tape.hpp"
#include "contextloc/pnet.hpp"
#include "contextloc/random.hpp"

namespace contextloc {

/// Everything about a video's proposals that does not depend on weights:
/// the three segments of each extended proposal, the video vector and the
/// proposal graph. Computed once and reused across epochs.
template <typename T>
struct PreparedVideo {
  const VideoFeatures<T>* video = nullptr;
  std::vector<Proposal> proposals;
  std::vector<std::array<Segment<T>, 3>> segments;
  Matrix<T> video_vec;
  ProposalGraph graph;
};

template <typename T>
PreparedVideo<T> prepare_video(const VideoFeatures<T>& video, const std::vector<Proposal>& proposals,
                               double theta_near) {
  video.validate();
  PreparedVideo<T> pv;
  pv.video = &video;
  pv.proposals = proposals;
  pv.video_vec = video_representation(video);
  std::vector<Interval> intervals;
  for (const Proposal& p : proposals) {
    pv.segments.push_back(make_extended_segments(video, extend_proposal(p, video.duration())));
    intervals.push_back(p.interval);
  }
  pv.graph = build_graph(intervals, theta_near);
  return pv;
}

/// The full network: shared context networks applied to each segment of an
/// extended proposal, one inter-proposal network over original proposals
/// (feeding classification) and one over extended proposals (feeding
/// completeness and regression), then the heads.
template <typename T>
class Model {
 public:
  Model() = default;
  explicit Model(const ModelConfig& config, std::uint64_t seed) : config_(config) {
    if (config.feature_dim < 2 || config.feature_dim % 2 != 0) {
      throw ConfigError("feature_dim must be even and >= 2");
    }
    const std::size_t d = static_cast<std::size_t>(config.feature_dim);
    const std::size_t classes = static_cast<std::size_t>(config.num_classes);
    auto rng = seeded_engine(seed, streams::model_init);
    lnet_ = LNetParams<T>::init(d, rng);
    gnet_ = GNetParams<T>::init(d, rng);
    const bool after = config.global_aggregation == GlobalAggregation::after_pnet;
    pnet_original_ = PNetParams<T>::init(config.pnet, after ? d / 2 : d, config.pnet_layers, rng, "pnet_original");
    pnet_extended_ = PNetParams<T>::init(config.pnet, after ? 3 * d / 2 : 3 * d, config.pnet_layers, rng, "pnet_extended");
    heads_ = HeadParams<T>::init(d, 3 * d, classes, rng);
  }

  Model(const Model&) = default;
  Model& operator=(const Model&) = default;

  const ModelConfig& config() const noexcept { return config_; }
  LNetParams<T>& lnet() noexcept { return lnet_; }
  GNetParams<T>& gnet() noexcept { return gnet_; }
  PNetParams<T>& pnet_original() noexcept { return pnet_original_; }
  PNetParams<T>& pnet_extended() noexcept { return pnet_extended_; }
  HeadParams<T>& heads() noexcept { return heads_; }

  /// Every trainable tensor in a fixed order.
  std::vector<Parameter<T>*> parameters() {
    std::vector<Parameter<T>*> out{&lnet_.w1, &lnet_.w2, &gnet_.w1, &gnet_.w2};
    for (auto* p : pnet_original_.parameters()) out.push_back(p);
    for (auto* p : pnet_extended_.parameters()) out.push_back(p);
    for (auto* p : heads_.parameters()) out.push_back(p);
    return out;
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (auto* p : parameters()) n += p->count();
    return n;
  }

  void zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
  }

  /// Records the forward pass for every proposal of one video.
  std::vector<HeadOutputs<T>> forward(Tape<T>& tape, const PreparedVideo<T>& pv) {
    const std::size_t n = pv.proposals.size();
    std::vector<HeadOutputs<T>> outputs;
    if (n == 0) return outputs;
    const ContextOptions opt = ContextOptions::from(config_);
    const Var<T> z = tape.constant(pv.video_vec);

    std::vector<ExtendedContext<T>> ctx;
    ctx.reserve(n);
    for (std::size_t i = 0; i < n; ++i) ctx.push_back(process_extended(tape, lnet_, gnet_, pv.segments[i], z, opt));

    std::vector<Var<T>> original_cols, extended_cols;
    const bool after = config_.global_aggregation == GlobalAggregation::after_pnet;
    for (const auto& c : ctx) {
      original_cols.push_back(after ? c.center().local : c.center().concatenated());
      extended_cols.push_back(after ? c.local_only() : c.concatenated());
    }
    const Var<T> original = ad::pnet_forward(pnet_original_, pv.graph, ad::hstack(original_cols));
    const Var<T> extended = ad::pnet_forward(pnet_extended_, pv.graph, ad::hstack(extended_cols));

    const std::size_t half = static_cast<std::size_t>(config_.feature_dim) / 2;
    for (std::size_t i = 0; i < n; ++i) {
      Var<T> orig_i = ad::column(original, i);
      Var<T> ext_i = ad::column(extended, i);
      if (after) {
        orig_i = ad::concat<T>({orig_i, ctx[i].center().global});
        std::vector<Var<T>> parts;
        for (std::size_t s = 0; s < 3; ++s) {
          parts.push_back(ad::slice(ext_i, s * half, half));
          parts.push_back(ctx[i].segments[s].global);
        }
        ext_i = ad::concat(parts);
      }
      outputs.push_back(ad::heads_forward(heads_, orig_i, ext_i));
    }
    return outputs;
  }

 private:
  ModelConfig config_;
  LNetParams<T> lnet_;
  GNetParams<T> gnet_;
  PNetParams<T> pnet_original_;
  PNetParams<T> pnet_extended_;
  HeadParams<T> heads_;
};

}  // namespace contextloc
