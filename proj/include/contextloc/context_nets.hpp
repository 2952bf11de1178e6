#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "contextloc/config.hpp"
#include "contextloc/datamodel.hpp"
#include "contextloc/numerics/tape.hpp"

namespace contextloc {

/// Weight matrix with entries uniform in +-1/sqrt(fan_in).
template <typename T>
Parameter<T> init_weight(std::string name, std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
  std::uniform_real_distribution<double> u(-bound, bound);
  Matrix<T> w(rows, cols);
  for (auto& v : w.data()) v = static_cast<T>(u(rng));
  return Parameter<T>(std::move(name), std::move(w));
}

/// Projections of the local-context network: W1 for the proposal, W2 for the
/// retrieved snippets. Both map R^D to R^{D/2}; there is no bias.
template <typename T>
struct LNetParams {
  Parameter<T> w1;
  Parameter<T> w2;

  static LNetParams init(std::size_t dim, std::mt19937_64& rng) {
    return {init_weight<T>("lnet.w1", dim / 2, dim, rng), init_weight<T>("lnet.w2", dim / 2, dim, rng)};
  }
  std::size_t count() const { return w1.count() + w2.count(); }
};

/// Projections of the global-context network: W1 for the video vector, W2 for
/// the attended proposal context. Same shapes as LNetParams.
template <typename T>
struct GNetParams {
  Parameter<T> w1;
  Parameter<T> w2;

  static GNetParams init(std::size_t dim, std::mt19937_64& rng) {
    return {init_weight<T>("gnet.w1", dim / 2, dim, rng), init_weight<T>("gnet.w2", dim / 2, dim, rng)};
  }
  std::size_t count() const { return w1.count() + w2.count(); }
};

/// Weights of both context networks for feature dimension `dim`. They are the
/// same objects whether one segment or all three of an extended proposal are
/// processed, so the count does not depend on the segment count.
inline std::size_t context_parameter_count(std::size_t dim) { return 4 * (dim / 2) * dim; }

/// Count for the alternative that treats an extended proposal as one
/// 3*dim-dimensional proposal with its own context-network weights.
inline std::size_t naive_extended_parameter_count(std::size_t dim) {
  return context_parameter_count(3 * dim);
}

/// One temporal segment ready for the context networks: its snippet features
/// as the columns of `keys` (ascending snippet index) and the max-pooled
/// proposal feature.
template <typename T>
struct Segment {
  Interval interval;
  std::vector<std::size_t> indices;
  Matrix<T> keys;    // D x |S|
  Matrix<T> pooled;  // D x 1
};

template <typename T>
Segment<T> make_segment(const VideoFeatures<T>& video, const Interval& interval) {
  Segment<T> s;
  s.interval = interval;
  s.indices = snippet_index_set(interval, video);
  s.keys = gather_snippets(video, s.indices);
  s.pooled = max_pool_columns(s.keys);
  return s;
}

// ---------------------------------------------------------------------------
// Recorded forms. These are what training uses; the value-level wrappers
// further down run them on a scratch tape.

namespace ad {

/// relu(cos(query, k_j)) normalized over the columns of `keys`, uniform when
/// the total falls below eps.
template <typename T>
Var<T> attention_weights(Var<T> query, Var<T> keys, T eps) {
  std::vector<Var<T>> scores;
  scores.reserve(keys.cols());
  for (std::size_t j = 0; j < keys.cols(); ++j) scores.push_back(relu(cosine(query, column(keys, j))));
  return normalize_sum(concat(scores), eps);
}

template <typename T>
Var<T> append_column(Var<T> m, Var<T> col) {
  std::vector<Var<T>> cols;
  for (std::size_t j = 0; j < m.cols(); ++j) cols.push_back(column(m, j));
  cols.push_back(col);
  return hstack(cols);
}

/// y_L = relu(W1 y + sum_j a_j W2 x_j), with a = attention_weights(y, keys).
template <typename T>
Var<T> lnet_forward(LNetParams<T>& params, Var<T> pooled, Var<T> keys, T eps) {
  Tape<T>& t = *pooled.tape;
  if (pooled.rows() != params.w1.value.cols() || keys.rows() != params.w2.value.cols()) {
    throw DimensionError("lnet: feature dimension does not match weights " + params.w1.value.shape_string());
  }
  const Var<T> a = attention_weights(pooled, keys, eps);
  const Var<T> retrieved = matmul(keys, a);
  return relu(add(matmul(t.parameter(params.w1), pooled), matmul(t.parameter(params.w2), retrieved)));
}

/// Attends z to the snippets and to the proposal with one shared normalizer;
/// the last entry of the result is the proposal weight.
template <typename T>
Var<T> gnet_attention(Var<T> video, Var<T> pooled, Var<T> keys, T eps) {
  std::vector<Var<T>> scores;
  for (std::size_t j = 0; j < keys.cols(); ++j) scores.push_back(relu(cosine(video, column(keys, j))));
  scores.push_back(relu(cosine(video, pooled)));
  return normalize_sum(concat(scores), eps);
}

/// z_G = relu(W1 z + W2 (sum_j a_j x_j + b y)).
template <typename T>
Var<T> gnet_forward(GNetParams<T>& params, Var<T> video, Var<T> pooled, Var<T> keys, T eps) {
  Tape<T>& t = *pooled.tape;
  if (video.rows() != params.w1.value.cols() || pooled.rows() != params.w2.value.cols()) {
    throw DimensionError("gnet: feature dimension does not match weights " + params.w1.value.shape_string());
  }
  const std::size_t k = keys.cols();
  const Var<T> w = gnet_attention(video, pooled, keys, eps);
  const Var<T> context = add(matmul(keys, slice(w, 0, k)), matmul(pooled, element(w, k)));
  return relu(add(matmul(t.parameter(params.w1), video), matmul(t.parameter(params.w2), context)));
}

}  // namespace ad

/// Per-segment outputs of the two context networks.
template <typename T>
struct SegmentContext {
  Var<T> local;   // y_L, D/2
  Var<T> global;  // z_G, D/2

  Var<T> concatenated() const { return ad::concat<T>({local, global}); }
};

/// Options that select which context networks are active. With a network
/// disabled its half of the segment feature is a plain projection of the
/// max-pooled proposal feature through that network's first weight.
struct ContextOptions {
  bool use_lnet = true;
  bool use_gnet = true;
  bool special_snippet = true;
  SpecialSnippetScope special_scope = SpecialSnippetScope::proposal;
  double eps = 1e-8;

  static ContextOptions from(const ModelConfig& m) {
    return {m.use_lnet, m.use_gnet, m.special_snippet, m.special_snippet_scope, m.attention_eps};
  }
};

template <typename T>
SegmentContext<T> segment_context(Tape<T>& tape, LNetParams<T>& lp, GNetParams<T>& gp, const Segment<T>& seg,
                                  Var<T> video_vec, const ContextOptions& opt) {
  const T eps = static_cast<T>(opt.eps);
  const Var<T> pooled = tape.constant(seg.pooled);
  const Var<T> keys = tape.constant(seg.keys);
  SegmentContext<T> out;
  if (opt.use_lnet) {
    Var<T> lkeys = keys;
    if (opt.special_snippet) {
      lkeys = ad::append_column(keys, opt.special_scope == SpecialSnippetScope::proposal ? pooled : video_vec);
    }
    out.local = ad::lnet_forward(lp, pooled, lkeys, eps);
  } else {
    out.local = ad::relu(ad::matmul(tape.parameter(lp.w1), pooled));
  }
  if (opt.use_gnet) {
    out.global = ad::gnet_forward(gp, video_vec, pooled, keys, eps);
  } else {
    out.global = ad::relu(ad::matmul(tape.parameter(gp.w1), pooled));
  }
  return out;
}

/// Segment outputs of an extended proposal, in left, center, right order.
template <typename T>
struct ExtendedContext {
  std::array<SegmentContext<T>, 3> segments;

  /// y_G(left) + y_G(center) + y_G(right), concatenated: R^{3D}.
  Var<T> concatenated() const {
    return ad::concat<T>({segments[0].local, segments[0].global, segments[1].local, segments[1].global,
                          segments[2].local, segments[2].global});
  }
  /// y_L of the three segments only: R^{3D/2}.
  Var<T> local_only() const {
    return ad::concat<T>({segments[0].local, segments[1].local, segments[2].local});
  }
  const SegmentContext<T>& center() const { return segments[1]; }
};

template <typename T>
std::array<Segment<T>, 3> make_extended_segments(const VideoFeatures<T>& video, const ExtendedProposal& ep) {
  return {make_segment(video, ep.left.interval), make_segment(video, ep.center.interval),
          make_segment(video, ep.right.interval)};
}

/// Runs both context networks on the three segments with the same parameter
/// objects.
template <typename T>
ExtendedContext<T> process_extended(Tape<T>& tape, LNetParams<T>& lp, GNetParams<T>& gp,
                                    const std::array<Segment<T>, 3>& segs, Var<T> video_vec,
                                    const ContextOptions& opt) {
  ExtendedContext<T> out;
  for (std::size_t s = 0; s < 3; ++s) out.segments[s] = segment_context(tape, lp, gp, segs[s], video_vec, opt);
  return out;
}

// ---------------------------------------------------------------------------
// Value-level API.

/// L-Net attention weights of `query` over the columns of `keys`.
template <typename T>
std::vector<T> lnet_attention(const Matrix<T>& query, const Matrix<T>& keys, T eps = T(1e-8)) {
  Tape<T> t;
  return ad::attention_weights(t.constant(query), t.constant(keys), eps).value().data();
}

/// Keys with the special snippet appended as an extra column.
template <typename T>
Matrix<T> with_special_snippet(const Matrix<T>& keys, const Matrix<T>& special) {
  if (special.rows() != keys.rows()) throw DimensionError("special snippet dimension mismatch");
  Matrix<T> out(keys.rows(), keys.cols() + 1);
  for (std::size_t i = 0; i < keys.rows(); ++i) {
    for (std::size_t j = 0; j < keys.cols(); ++j) out(i, j) = keys(i, j);
    out(i, keys.cols()) = special[i];
  }
  return out;
}

/// y_L for given attention weights over the columns of `keys`. With
/// `include_special`, `pooled` is appended as an extra snippet and `weights`
/// must cover it.
template <typename T>
Matrix<T> lnet_aggregate(const Matrix<T>& pooled, const Matrix<T>& keys, const std::vector<T>& weights,
                         const LNetParams<T>& params, bool include_special) {
  const Matrix<T> k = include_special ? with_special_snippet(keys, pooled) : keys;
  if (weights.size() != k.cols()) throw DimensionError("lnet_aggregate: weight count does not match snippets");
  if (pooled.rows() != params.w1.value.cols() || k.rows() != params.w2.value.cols()) {
    throw DimensionError("lnet_aggregate: feature dimension does not match weights");
  }
  const Matrix<T> retrieved = matmul(k, Matrix<T>::column(weights));
  Matrix<T> out = matmul(params.w1.value, pooled);
  const Matrix<T> values = matmul(params.w2.value, retrieved);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = nan_relu(out[i] + values[i]);
  return out;
}

template <typename T>
struct GNetAdaptation {
  std::vector<T> snippet_weights;  // a^G
  T proposal_weight = T(0);        // b^G
  Matrix<T> adapted;               // z_G
};

template <typename T>
GNetAdaptation<T> gnet_adapt(const Matrix<T>& video, const Matrix<T>& pooled, const Matrix<T>& keys,
                             GNetParams<T>& params, T eps = T(1e-8)) {
  Tape<T> t;
  const Var<T> z = t.constant(video), y = t.constant(pooled), k = t.constant(keys);
  GNetAdaptation<T> out;
  std::vector<T> w = ad::gnet_attention(z, y, k, eps).value().data();
  out.proposal_weight = w.back();
  w.pop_back();
  out.snippet_weights = std::move(w);
  out.adapted = ad::gnet_forward(params, z, y, k, eps).value();
  return out;
}

/// y_G = y_L concatenated with z_G.
template <typename T>
Matrix<T> gnet_aggregate(const Matrix<T>& local, const Matrix<T>& global) {
  if (!local.is_column() || !global.is_column() || local.rows() != global.rows()) {
    throw DimensionError("gnet_aggregate: halves " + local.shape_string() + " and " + global.shape_string());
  }
  std::vector<T> out = local.data();
  out.insert(out.end(), global.data().begin(), global.data().end());
  return Matrix<T>::column(std::move(out));
}

}  // namespace contextloc
