#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "contextloc/config.hpp"
#include "contextloc/dataset.hpp"
#include "contextloc/eval.hpp"
#include "contextloc/random.hpp"

namespace contextloc {

/// Class-level directions shared by every video generated from one seed.
template <typename T>
struct SyntheticWorld {
  std::vector<Matrix<T>> signatures;  // one unit vector per class
  std::vector<Matrix<T>> activities;  // one unit vector per class, distinct from signatures
};

namespace detail {

template <typename T>
Matrix<T> random_unit(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix<T> v(dim, 1);
  double n2 = 0.0;
  while (n2 < 1e-6) {
    n2 = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      v[i] = static_cast<T>(normal(rng));
      n2 += static_cast<double>(v[i]) * static_cast<double>(v[i]);
    }
  }
  const double n = std::sqrt(n2);
  for (std::size_t i = 0; i < dim; ++i) v[i] = static_cast<T>(static_cast<double>(v[i]) / n);
  return v;
}

inline Interval clamp_interval(Interval iv, double end, double min_len) {
  iv.start = std::clamp(iv.start, 0.0, end);
  iv.end = std::clamp(iv.end, 0.0, end);
  if (iv.end - iv.start < min_len) {
    const double c = std::clamp(iv.center(), 0.5 * min_len, end - 0.5 * min_len);
    iv = {c - 0.5 * min_len, c + 0.5 * min_len};
  }
  return iv;
}

}  // namespace detail

template <typename T>
SyntheticWorld<T> make_world(std::uint64_t seed, int num_classes, int dim) {
  auto rng = seeded_engine(seed, streams::world);
  SyntheticWorld<T> w;
  for (int c = 0; c < num_classes; ++c) w.signatures.push_back(detail::random_unit<T>(rng, dim));
  for (int c = 0; c < num_classes; ++c) w.activities.push_back(detail::random_unit<T>(rng, dim));
  return w;
}

/// Desk-scale stand-in for a localization benchmark.
///
/// Each video has a theme class c. Every snippet carries the class activity
/// direction (scaled by activity_scale) plus Gaussian noise; snippets inside an
/// action instance additionally carry the class signature. Proposals are
/// jittered copies of each instance (tight, loose and mostly-off partial
/// ones) plus decoys that never touch an instance. Videos are generated from
/// independent streams keyed by (seed, video index), so disjoint index ranges
/// give train/test splits over the same classes.
template <typename T>
Dataset<T> generate_synthetic(const Config& config) {
  const int C = config.model.num_classes;
  const int D = config.model.feature_dim;
  const auto& sc = config.synthetic;
  if (C < 2) throw ConfigError("synthetic data needs num_classes >= 2");
  if (D < 4) throw ConfigError("synthetic data needs feature_dim >= 4");
  if (sc.num_videos < 1 || sc.snippets_per_video < 8 || sc.noise_sigma < 0 || !(sc.snippet_duration > 0)) {
    throw ConfigError("invalid synthetic dataset configuration");
  }
  const SyntheticWorld<T> world = make_world<T>(config.seed, C, D);
  auto rotation_rng = seeded_engine(config.seed, streams::class_rotation);
  const int rotation = static_cast<int>(rotation_rng() % static_cast<std::uint64_t>(C));

  Dataset<T> data;
  data.num_classes = C;
  const int N = sc.snippets_per_video;
  const double dur = sc.snippet_duration;
  const double video_end = N * dur;

  for (int i = 0; i < sc.num_videos; ++i) {
    const int index = sc.first_video + i;
    auto rng = seeded_engine(config.seed, streams::first_video + static_cast<std::uint64_t>(index));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, sc.noise_sigma > 0 ? sc.noise_sigma : 1.0);
    const int cls = (index + rotation) % C;

    // Instance placement in snippet units, separated by at least two snippets.
    const int min_len = std::max(3, N / 8);
    const int max_len = std::max(min_len, N / 4);
    const int wanted = N >= 24 ? 1 + static_cast<int>(rng() % 2) : 1;
    std::vector<std::pair<int, int>> spans;  // [start, end) in snippets
    for (int attempt = 0; attempt < 200 && static_cast<int>(spans.size()) < wanted; ++attempt) {
      const int len = min_len + static_cast<int>(rng() % static_cast<std::uint64_t>(max_len - min_len + 1));
      const int start = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(std::max(1, N - len - 1)));
      const int end = start + len;
      if (end > N) continue;
      const bool clash = std::any_of(spans.begin(), spans.end(), [&](auto s) {
        return start < s.second + 2 && s.first < end + 2;
      });
      if (!clash) spans.emplace_back(start, end);
    }
    std::sort(spans.begin(), spans.end());

    VideoRecord<T> rec;
    char id[32];
    std::snprintf(id, sizeof id, "video_%04d", index);
    rec.features.video_id = id;
    rec.features.snippet_duration = dur;
    rec.features.snippets = Matrix<T>(static_cast<std::size_t>(N), static_cast<std::size_t>(D));
    for (int j = 0; j < N; ++j) {
      const bool in_action =
          std::any_of(spans.begin(), spans.end(), [&](auto s) { return j >= s.first && j < s.second; });
      for (int d = 0; d < D; ++d) {
        double v = sc.activity_scale * static_cast<double>(world.activities[cls][d]);
        if (in_action) v += static_cast<double>(world.signatures[cls][d]);
        if (sc.noise_sigma > 0) v += noise(rng);
        rec.features.snippets(j, d) = static_cast<T>(v);
      }
    }

    for (auto [s, e] : spans) rec.ground_truth.push_back({{s * dur, e * dur}, cls});

    auto jitter = [&](double amount) { return (2.0 * unit(rng) - 1.0) * amount; };
    for (const auto& g : rec.ground_truth) {
      const double len = g.interval.duration();
      for (int k = 0; k < 2; ++k) {
        Interval iv{g.interval.start + jitter(0.1 * len), g.interval.end + jitter(0.1 * len)};
        rec.proposals.push_back({detail::clamp_interval(iv, video_end, dur), 0.85 + 0.1 * unit(rng)});
      }
      {
        Interval iv{g.interval.start + jitter(0.3 * len), g.interval.end + jitter(0.3 * len)};
        rec.proposals.push_back({detail::clamp_interval(iv, video_end, dur), 0.6 + 0.1 * unit(rng)});
      }
      {
        const double shift = (0.6 + 0.2 * unit(rng)) * len * (unit(rng) < 0.5 ? -1.0 : 1.0);
        Interval iv{g.interval.start + shift, g.interval.end + shift};
        rec.proposals.push_back({detail::clamp_interval(iv, video_end, dur), 0.4 + 0.1 * unit(rng)});
      }
    }
    for (int k = 0, placed = 0; k < 100 && placed < 2; ++k) {
      const double len = dur * (3 + static_cast<int>(rng() % static_cast<std::uint64_t>(std::max(1, N / 4 - 2))));
      const double start = unit(rng) * (video_end - len);
      const Interval iv{start, start + len};
      const bool touches = std::any_of(rec.ground_truth.begin(), rec.ground_truth.end(),
                                       [&](const auto& g) { return tiou(iv, g.interval) > 0.0; });
      if (touches) continue;
      rec.proposals.push_back({iv, 0.2 + 0.1 * unit(rng)});
      ++placed;
    }
    std::sort(rec.proposals.begin(), rec.proposals.end(), [](const Proposal& a, const Proposal& b) {
      return std::tie(a.interval.start, a.interval.end) < std::tie(b.interval.start, b.interval.end);
    });
    data.videos.push_back(std::move(rec));
  }
  return data;
}

}  // namespace contextloc
