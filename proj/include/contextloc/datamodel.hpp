#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "contextloc/error.hpp"
#include "contextloc/numerics/matrix.hpp"

namespace contextloc {

/// Half-open time interval in seconds.
struct Interval {
  double start = 0.0;
  double end = 0.0;

  double duration() const noexcept { return end - start; }
  double center() const noexcept { return 0.5 * (start + end); }
  friend bool operator==(const Interval&, const Interval&) = default;
};

/// Snippet-level features of one video: row j of `snippets` is x_j.
template <typename T>
struct VideoFeatures {
  std::string video_id;
  double snippet_duration = 1.0;
  Matrix<T> snippets;  // N x D

  std::size_t num_snippets() const noexcept { return snippets.rows(); }
  std::size_t dim() const noexcept { return snippets.cols(); }
  double duration() const noexcept { return snippet_duration * static_cast<double>(num_snippets()); }

  Matrix<T> snippet(std::size_t j) const {
    const auto r = snippets.row(j);
    return Matrix<T>::column(std::vector<T>(r.begin(), r.end()));
  }

  void validate() const {
    if (num_snippets() == 0) throw ContractError("video " + video_id + " has no snippets");
    if (dim() == 0) throw DimensionError("video " + video_id + " has zero feature dimension");
    if (!(snippet_duration > 0.0)) throw ContractError("snippet duration must be positive");
  }
};

struct Proposal {
  Interval interval;
  double score = 0.0;

  double start() const noexcept { return interval.start; }
  double end() const noexcept { return interval.end; }
  double duration() const noexcept { return interval.duration(); }
};

/// The original proposal plus the regions on either side that are half its length.
struct ExtendedProposal {
  Proposal left;
  Proposal center;
  Proposal right;
};

struct GroundTruthInstance {
  Interval interval;
  int class_id = 0;
};

/// Indices of snippets whose interval [j*dur, (j+1)*dur) intersects the
/// half-open segment, in ascending order. A segment that touches no snippet
/// (zero width, or outside the video) gets the snippet whose center is
/// closest to the segment center, ties going to the lower index.
template <typename T>
std::vector<std::size_t> snippet_index_set(const Interval& segment, const VideoFeatures<T>& video) {
  const std::size_t n = video.num_snippets();
  if (n == 0) throw ContractError("snippet_index_set: video " + video.video_id + " is empty");
  const double dur = video.snippet_duration;
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < n; ++j) {
    const double s = dur * static_cast<double>(j);
    const double e = dur * static_cast<double>(j + 1);
    if (s < segment.end && e > segment.start) out.push_back(j);
  }
  if (out.empty()) {
    const double c = segment.center();
    std::size_t best = 0;
    double best_dist = std::abs(0.5 * dur - c);
    for (std::size_t j = 1; j < n; ++j) {
      const double d = std::abs(dur * (static_cast<double>(j) + 0.5) - c);
      if (d < best_dist) {
        best = j;
        best_dist = d;
      }
    }
    out.push_back(best);
  }
  return out;
}

/// Extends by half the duration on each side, clamped to [0, video_end].
inline ExtendedProposal extend_proposal(const Proposal& p, double video_end) {
  const double half = 0.5 * p.duration();
  ExtendedProposal ep;
  ep.center = p;
  ep.left = Proposal{{std::clamp(p.start() - half, 0.0, video_end), std::clamp(p.start(), 0.0, video_end)}, p.score};
  ep.right = Proposal{{std::clamp(p.end(), 0.0, video_end), std::clamp(p.end() + half, 0.0, video_end)}, p.score};
  return ep;
}

/// Gathers the snippets with the given indices into the columns of a D x k
/// matrix, in ascending index order regardless of the order passed in.
template <typename T>
Matrix<T> gather_snippets(const VideoFeatures<T>& video, std::vector<std::size_t> indices) {
  if (indices.empty()) throw ContractError("gather_snippets: empty index set");
  std::sort(indices.begin(), indices.end());
  Matrix<T> keys(video.dim(), indices.size());
  for (std::size_t c = 0; c < indices.size(); ++c) {
    if (indices[c] >= video.num_snippets()) throw DimensionError("gather_snippets: index out of range");
    const auto r = video.snippets.row(indices[c]);
    for (std::size_t i = 0; i < r.size(); ++i) keys(i, c) = r[i];
  }
  return keys;
}

/// Row-wise maximum over the columns of a matrix.
template <typename T>
Matrix<T> max_pool_columns(const Matrix<T>& m) {
  if (m.cols() == 0) throw ContractError("max_pool_columns: no columns");
  Matrix<T> out(m.rows(), 1);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out[r] = m(r, 0);
    for (std::size_t c = 1; c < m.cols(); ++c) out[r] = nan_max(out[r], m(r, c));
  }
  return out;
}

/// Video-level representation z: max-pool over every snippet.
template <typename T>
Matrix<T> video_representation(const VideoFeatures<T>& video) {
  video.validate();
  return max_pool_columns(video.snippets.transposed());
}

}  // namespace contextloc
