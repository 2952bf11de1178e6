#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "contextloc/context_nets.hpp"
#include "contextloc/numerics/gradcheck.hpp"

using namespace contextloc;
using M = Matrix<double>;

namespace {

M random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c) {
  std::normal_distribution<double> normal(0.0, 1.0);
  M m(r, c);
  for (auto& v : m.data()) v = normal(rng);
  return m;
}

// Independent dense evaluation of the attention and aggregation formulas.
double ref_cos(const M& u, std::size_t ucol, const M& v, std::size_t vcol) {
  double d = 0, nu = 0, nv = 0;
  for (std::size_t i = 0; i < u.rows(); ++i) {
    d += u(i, ucol) * v(i, vcol);
    nu += u(i, ucol) * u(i, ucol);
    nv += v(i, vcol) * v(i, vcol);
  }
  nu = std::sqrt(nu);
  nv = std::sqrt(nv);
  return (nu < 1e-12 || nv < 1e-12) ? 0.0 : d / (nu * nv);
}

std::vector<double> ref_normalize(std::vector<double> s) {
  for (auto& v : s) v = std::max(0.0, v);
  const double total = std::accumulate(s.begin(), s.end(), 0.0);
  if (total < 1e-8) return std::vector<double>(s.size(), 1.0 / static_cast<double>(s.size()));
  for (auto& v : s) v /= total;
  return s;
}

M ref_relu_mv(const M& w, const M& x) {
  M out(w.rows(), 1);
  for (std::size_t i = 0; i < w.rows(); ++i)
    for (std::size_t j = 0; j < w.cols(); ++j) out[i] += w(i, j) * x[j];
  return out;
}

M ref_lnet(const M& w1, const M& w2, const M& y, const M& keys) {
  std::vector<double> s;
  for (std::size_t j = 0; j < keys.cols(); ++j) s.push_back(ref_cos(y, 0, keys, j));
  const auto a = ref_normalize(s);
  M retrieved(y.rows(), 1);
  for (std::size_t j = 0; j < keys.cols(); ++j)
    for (std::size_t i = 0; i < y.rows(); ++i) retrieved[i] += a[j] * keys(i, j);
  M out = ref_relu_mv(w1, y);
  const M v = ref_relu_mv(w2, retrieved);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(0.0, out[i] + v[i]);
  return out;
}

M ref_gnet(const M& w1, const M& w2, const M& z, const M& y, const M& keys) {
  std::vector<double> s;
  for (std::size_t j = 0; j < keys.cols(); ++j) s.push_back(ref_cos(z, 0, keys, j));
  s.push_back(ref_cos(z, 0, y, 0));
  const auto a = ref_normalize(s);
  M ctx(y.rows(), 1);
  for (std::size_t i = 0; i < y.rows(); ++i) {
    for (std::size_t j = 0; j < keys.cols(); ++j) ctx[i] += a[j] * keys(i, j);
    ctx[i] += a.back() * y[i];
  }
  M out = ref_relu_mv(w1, z);
  const M v = ref_relu_mv(w2, ctx);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(0.0, out[i] + v[i]);
  return out;
}

VideoFeatures<double> random_video(std::mt19937_64& rng, std::size_t n, std::size_t d) {
  VideoFeatures<double> v;
  v.video_id = "v";
  v.snippet_duration = 1.0;
  v.snippets = random_matrix(rng, n, d);
  return v;
}

}  // namespace

TEST(LNetAttention, SpecExamples) {
  const M y = M::column({1, 0});
  auto w = lnet_attention(y, M::from_rows({{1, 0, -1}, {0, 1, 0}}));
  EXPECT_EQ(w, (std::vector<double>{1, 0, 0}));

  w = lnet_attention(y, M::from_rows({{1, 1}, {0, 1}}));
  // 1 / (1 + 1/sqrt 2) and (1/sqrt 2) / (1 + 1/sqrt 2)
  EXPECT_NEAR(w[0], 0.58578643762690485, 1e-12);
  EXPECT_NEAR(w[1], 0.41421356237309515, 1e-12);

  w = lnet_attention(y, M::from_rows({{-1, 0}, {0, -1}}));
  EXPECT_EQ(w, (std::vector<double>{0.5, 0.5}));
}

TEST(LNetAttention, NonnegativeAndSumsToOne) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t d = 2 + rng() % 8, k = 1 + rng() % 12;
    M keys = random_matrix(rng, d, k);
    M y = random_matrix(rng, d, 1);
    if (trial % 5 == 0) {
      // every key opposite to the query: zero denominator
      for (std::size_t j = 0; j < k; ++j)
        for (std::size_t i = 0; i < d; ++i) keys(i, j) = -y[i] * (1.0 + static_cast<double>(j));
    }
    const auto w = lnet_attention(y, keys);
    ASSERT_EQ(w.size(), k);
    double total = 0;
    for (double v : w) {
      EXPECT_GE(v, 0.0);
      total += v;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(LNetAggregate, SpecExamples) {
  LNetParams<double> p;
  p.w1 = Parameter<double>("w1", M::from_rows({{1, 0, 0, 0}, {0, 1, 0, 0}}));
  p.w2 = p.w1;
  const M x = M::column({1, 0, 0, 0});
  EXPECT_EQ(lnet_aggregate(x, x, {1.0}, p, false), M::column({2, 0}));

  LNetParams<double> zero;
  zero.w1 = Parameter<double>("w1", M(2, 4));
  zero.w2 = zero.w1;
  EXPECT_EQ(lnet_aggregate(x, M::from_rows({{1, 2}, {3, 4}, {5, 6}, {7, 8}}), {0.5, 0.5}, zero, false), M(2, 1));
}

TEST(LNetAggregate, SpecialSnippetEqualsDuplicatingTheSingleSnippet) {
  std::mt19937_64 rng(2);
  LNetParams<double> p = LNetParams<double>::init(6, rng);
  const M x = random_matrix(rng, 6, 1);
  // With one snippet the pooled feature is that snippet.
  const auto w_special = lnet_attention(x, with_special_snippet(x, x));
  const M with = lnet_aggregate(x, x, w_special, p, true);
  const M without = lnet_aggregate(x, x, lnet_attention(x, x), p, false);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(with[i], without[i], 1e-15);
  EXPECT_NEAR(w_special[0], 0.5, 1e-15);
}

TEST(LNetAggregate, DimensionMismatchThrows) {
  std::mt19937_64 rng(2);
  LNetParams<double> p = LNetParams<double>::init(4, rng);
  EXPECT_THROW(lnet_aggregate(M(6, 1), M(6, 2), {0.5, 0.5}, p, false), DimensionError);
  EXPECT_THROW(lnet_aggregate(M(4, 1), M(4, 2), {1.0}, p, false), DimensionError);
}

TEST(GNetAdapt, SpecExamples) {
  std::mt19937_64 rng(3);
  GNetParams<double> p = GNetParams<double>::init(2, rng);
  const M z = M::column({1, 0});

  auto r = gnet_adapt(z, M::column({0, 1}), M::column({1, 0}), p);
  EXPECT_EQ(r.snippet_weights, (std::vector<double>{1.0}));
  EXPECT_EQ(r.proposal_weight, 0.0);

  r = gnet_adapt(z, M::column({1, 0}), M::column({1, 0}), p);
  EXPECT_EQ(r.snippet_weights, (std::vector<double>{0.5}));
  EXPECT_EQ(r.proposal_weight, 0.5);

  const double h = 1.0 / std::sqrt(2.0);
  r = gnet_adapt(z, M::column({1, 0}), M::column({h, h}), p);
  EXPECT_NEAR(r.snippet_weights[0], 0.41421356237309509, 1e-12);
  EXPECT_NEAR(r.proposal_weight, 0.58578643762690491, 1e-12);
}

TEST(GNetAdapt, WeightsSumToOneIncludingFallback) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t d = 2 * (1 + rng() % 4), k = 1 + rng() % 12;
    GNetParams<double> p = GNetParams<double>::init(d, rng);
    M z = random_matrix(rng, d, 1);
    M keys = random_matrix(rng, d, k);
    M y = random_matrix(rng, d, 1);
    if (trial % 4 == 0) {
      for (std::size_t i = 0; i < d; ++i) {
        y[i] = -z[i];
        for (std::size_t j = 0; j < k; ++j) keys(i, j) = -2.0 * z[i];
      }
    }
    const auto r = gnet_adapt(z, y, keys, p);
    double total = r.proposal_weight;
    EXPECT_GE(r.proposal_weight, 0.0);
    for (double v : r.snippet_weights) {
      EXPECT_GE(v, 0.0);
      total += v;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    if (trial % 4 == 0) {
      EXPECT_DOUBLE_EQ(r.proposal_weight, 1.0 / static_cast<double>(k + 1));
    }
  }
}

TEST(GNetAggregate, Concatenation) {
  EXPECT_EQ(gnet_aggregate(M::column({1, 2}), M::column({3, 4})), M::column({1, 2, 3, 4}));
  EXPECT_EQ(gnet_aggregate(M(3, 1), M(3, 1)), M(6, 1));
  std::mt19937_64 rng(5);
  const M l = random_matrix(rng, 4, 1), g = random_matrix(rng, 4, 1);
  const M y = gnet_aggregate(l, g);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(y[i], l[i]);
    EXPECT_EQ(y[4 + i], g[i]);
  }
  EXPECT_THROW(gnet_aggregate(M(3, 1), M(2, 1)), DimensionError);
}

TEST(ContextNets, MatchDenseOracle) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t d = 2 * (1 + rng() % 8), k = 1 + rng() % 12;
    LNetParams<double> lp = LNetParams<double>::init(d, rng);
    GNetParams<double> gp = GNetParams<double>::init(d, rng);
    const M keys = random_matrix(rng, d, k), z = random_matrix(rng, d, 1);
    M y(d, 1);
    for (std::size_t i = 0; i < d; ++i) {
      y[i] = keys(i, 0);
      for (std::size_t j = 1; j < k; ++j) y[i] = std::max(y[i], keys(i, j));
    }
    const M yl = lnet_aggregate(y, keys, lnet_attention(y, keys), lp, false);
    const M expect_l = ref_lnet(lp.w1.value, lp.w2.value, y, keys);
    const M zg = gnet_adapt(z, y, keys, gp).adapted;
    const M expect_g = ref_gnet(gp.w1.value, gp.w2.value, z, y, keys);
    ASSERT_EQ(yl.rows(), d / 2);
    ASSERT_EQ(zg.rows(), d / 2);
    for (std::size_t i = 0; i < d / 2; ++i) {
      EXPECT_NEAR(yl[i], expect_l[i], 1e-12);
      EXPECT_NEAR(zg[i], expect_g[i], 1e-12);
      EXPECT_GE(yl[i], 0.0);
      EXPECT_GE(zg[i], 0.0);
    }
  }
}

TEST(ContextNets, PositiveScaleLeavesAttentionUnchanged) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t d = 4, k = 1 + rng() % 8;
    M keys = random_matrix(rng, d, k);
    const M y = random_matrix(rng, d, 1);
    const auto before = lnet_attention(y, keys);
    const std::size_t j = rng() % k;
    const double c = scale(rng);
    for (std::size_t i = 0; i < d; ++i) keys(i, j) *= c;
    const auto after = lnet_attention(y, keys);
    for (std::size_t m = 0; m < k; ++m) EXPECT_NEAR(after[m], before[m], 1e-12);
  }
}

TEST(ContextNets, SnippetOrderDoesNotMatter) {
  std::mt19937_64 rng(8);
  const auto video = random_video(rng, 12, 8);
  LNetParams<double> lp = LNetParams<double>::init(8, rng);
  GNetParams<double> gp = GNetParams<double>::init(8, rng);
  const M z = video_representation(video);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::size_t> idx(2 + rng() % 8);
    for (auto& i : idx) i = rng() % 12;
    std::sort(idx.begin(), idx.end());
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    auto shuffled = idx;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const M k1 = gather_snippets(video, idx), k2 = gather_snippets(video, shuffled);
    const M y = max_pool_columns(k1);
    EXPECT_EQ(lnet_aggregate(y, k1, lnet_attention(y, with_special_snippet(k1, y)), lp, true),
              lnet_aggregate(y, k2, lnet_attention(y, with_special_snippet(k2, y)), lp, true));
    EXPECT_EQ(gnet_adapt(z, y, k1, gp).adapted, gnet_adapt(z, y, k2, gp).adapted);
  }
}

TEST(ContextNets, SegmentShapes) {
  for (std::size_t d : {8u, 16u, 32u}) {
    std::mt19937_64 rng(d);
    const auto video = random_video(rng, 20, d);
    LNetParams<double> lp = LNetParams<double>::init(d, rng);
    GNetParams<double> gp = GNetParams<double>::init(d, rng);
    EXPECT_EQ(lp.w1.value.rows(), d / 2);
    EXPECT_EQ(lp.w1.value.cols(), d);
    EXPECT_EQ(gp.w2.value.rows(), d / 2);
    Tape<double> tape;
    const auto segs = make_extended_segments(video, extend_proposal({{4.0, 10.0}, 1.0}, video.duration()));
    const auto ctx =
        process_extended(tape, lp, gp, segs, tape.constant(video_representation(video)), ContextOptions{});
    EXPECT_EQ(ctx.center().local.rows(), d / 2);
    EXPECT_EQ(ctx.center().global.rows(), d / 2);
    EXPECT_EQ(ctx.center().concatenated().rows(), d);
    EXPECT_EQ(ctx.concatenated().rows(), 3 * d);
    EXPECT_EQ(ctx.local_only().rows(), 3 * d / 2);
  }
}

TEST(ProcessExtended, IdenticalSegmentsGiveIdenticalBlocks) {
  std::mt19937_64 rng(9);
  const auto video = random_video(rng, 10, 8);
  LNetParams<double> lp = LNetParams<double>::init(8, rng);
  GNetParams<double> gp = GNetParams<double>::init(8, rng);
  const auto seg = make_segment(video, {2.0, 5.0});
  Tape<double> tape;
  const auto out = process_extended(tape, lp, gp, {seg, seg, seg}, tape.constant(video_representation(video)),
                                    ContextOptions{})
                       .concatenated()
                       .value();
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_EQ(out[i], out[8 + i]);
    EXPECT_EQ(out[i], out[16 + i]);
  }
}

TEST(ProcessExtended, MatchesSingleSegmentComposition) {
  std::mt19937_64 rng(10);
  const auto video = random_video(rng, 16, 8);
  LNetParams<double> lp = LNetParams<double>::init(8, rng);
  GNetParams<double> gp = GNetParams<double>::init(8, rng);
  const M z = video_representation(video);
  const auto ep = extend_proposal({{5.0, 11.0}, 1.0}, video.duration());
  ContextOptions opt;
  opt.special_snippet = false;
  Tape<double> tape;
  const M out = process_extended(tape, lp, gp, make_extended_segments(video, ep), tape.constant(z), opt)
                    .concatenated()
                    .value();
  std::size_t pos = 0;
  for (const auto& part : {ep.left, ep.center, ep.right}) {
    const auto seg = make_segment(video, part.interval);
    const M yl = lnet_aggregate(seg.pooled, seg.keys, lnet_attention(seg.pooled, seg.keys), lp, false);
    const M zg = gnet_adapt(z, seg.pooled, seg.keys, gp).adapted;
    const M yg = gnet_aggregate(yl, zg);
    for (std::size_t i = 0; i < yg.size(); ++i) EXPECT_EQ(out[pos + i], yg[i]);
    pos += yg.size();
  }
  EXPECT_EQ(pos, 24u);
}

TEST(ProcessExtended, ParameterCountDoesNotDependOnSegments) {
  std::mt19937_64 rng(11);
  LNetParams<double> lp = LNetParams<double>::init(16, rng);
  GNetParams<double> gp = GNetParams<double>::init(16, rng);
  const auto video = random_video(rng, 10, 16);
  const M z = video_representation(video);

  auto params_seen = [&](std::size_t segments) {
    Tape<double> tape;
    const auto seg = make_segment(video, {1.0, 4.0});
    std::vector<Var<double>> outs;
    for (std::size_t s = 0; s < segments; ++s)
      outs.push_back(segment_context(tape, lp, gp, seg, tape.constant(z), ContextOptions{}).concatenated());
    lp.w1.zero_grad();
    lp.w2.zero_grad();
    gp.w1.zero_grad();
    gp.w2.zero_grad();
    tape.backward(ad::sum(ad::concat(outs)));
    return lp.count() + gp.count();
  };
  EXPECT_EQ(params_seen(1), params_seen(3));
  EXPECT_EQ(lp.count() + gp.count(), context_parameter_count(16));
}

TEST(ContextNets, GradientsPassFiniteDifferences) {
  std::mt19937_64 rng(12);
  int checked = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto video = random_video(rng, 8, 8);
    LNetParams<double> lp = LNetParams<double>::init(8, rng);
    GNetParams<double> gp = GNetParams<double>::init(8, rng);
    const auto segs = make_extended_segments(video, extend_proposal({{2.0, 6.0}, 1.0}, video.duration()));
    const M z = video_representation(video);
    auto build = [&](Tape<double>& t) {
      const auto ctx = process_extended(t, lp, gp, segs, t.constant(z), ContextOptions{});
      const auto f = ctx.concatenated();
      return ad::dot(f, f);
    };
    const auto report = finite_diff_check<double>(build, {&lp.w1, &lp.w2, &gp.w1, &gp.w2}, 1e-5);
    if (report.min_kink_margin < 1e-3) continue;
    ++checked;
    EXPECT_LT(report.max_rel_error, 1e-4);
  }
  EXPECT_GE(checked, 5);
}
