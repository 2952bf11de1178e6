#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "contextloc/numerics/gradcheck.hpp"
#include "contextloc/pnet.hpp"

using namespace contextloc;
using M = Matrix<double>;

namespace {

M random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c) {
  std::normal_distribution<double> normal(0.0, 1.0);
  M m(r, c);
  for (auto& v : m.data()) v = normal(rng);
  return m;
}

std::vector<Interval> random_intervals(std::mt19937_64& rng, std::size_t n, double span = 40.0) {
  std::uniform_real_distribution<double> start(0.0, span), len(0.5, 8.0);
  std::vector<Interval> out;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = start(rng);
    out.push_back({s, s + len(rng)});
  }
  return out;
}

// Message passing written node by node from the edge list.
M ref_graph_conv(const std::vector<Interval>& props, double theta, const M& f, PNetParams<double>& p) {
  const std::size_t n = props.size();
  M cur = f;
  for (auto& layer : p.graph_layers) {
    M next(cur.rows(), n);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> acc(cur.rows(), 0.0);
      for (std::size_t r = 0; r < cur.rows(); ++r)
        for (std::size_t c = 0; c < cur.rows(); ++c) acc[r] += layer.self.value(r, c) * cur(c, i);
      for (int type = 0; type < 2; ++type) {
        std::vector<std::pair<std::size_t, double>> nbrs;
        for (std::size_t j = 0; j < n; ++j) {
          if (j == i) continue;
          const double iou = tiou(props[i], props[j]);
          const double mean_dur = 0.5 * (props[i].duration() + props[j].duration());
          const double dist = std::abs(props[i].center() - props[j].center());
          if (type == 0 && iou > 0) nbrs.push_back({j, iou});
          if (type == 1 && iou == 0 && dist <= theta * mean_dur) nbrs.push_back({j, 1.0 / (1.0 + dist / mean_dur)});
        }
        double total = 0;
        for (auto& [j, w] : nbrs) total += w;
        for (auto& [j, w] : nbrs)
          for (std::size_t r = 0; r < cur.rows(); ++r)
            for (std::size_t c = 0; c < cur.rows(); ++c) acc[r] += (w / total) * layer.edge[type].value(r, c) * cur(c, j);
      }
      for (std::size_t r = 0; r < cur.rows(); ++r) next(r, i) = std::max(0.0, acc[r]);
    }
    cur = next;
  }
  return cur;
}

M mv(const M& w, const M& f, std::size_t col) {
  M out(w.rows(), 1);
  for (std::size_t r = 0; r < w.rows(); ++r)
    for (std::size_t c = 0; c < w.cols(); ++c) out[r] += w(r, c) * f(c, col);
  return out;
}

M ref_nonlocal(const M& f, PNetParams<double>& p) {
  M cur = f;
  for (auto& b : p.nonlocal_blocks) {
    const std::size_t n = cur.cols();
    M next = cur;
    for (std::size_t i = 0; i < n; ++i) {
      const M q = mv(b.query.value, cur, i);
      std::vector<double> s(n);
      for (std::size_t j = 0; j < n; ++j) {
        const M k = mv(b.key.value, cur, j);
        for (std::size_t r = 0; r < q.rows(); ++r) s[j] += q[r] * k[r];
      }
      const double mx = *std::max_element(s.begin(), s.end());
      double z = 0;
      for (auto& v : s) z += (v = std::exp(v - mx));
      M agg(cur.rows(), 1);
      for (std::size_t j = 0; j < n; ++j) {
        const M v = mv(b.value.value, cur, j);
        for (std::size_t r = 0; r < v.rows(); ++r) agg[r] += s[j] / z * v[r];
      }
      const M o = mv(b.out.value, agg, 0);
      for (std::size_t r = 0; r < o.rows(); ++r) next(r, i) += o[r];
    }
    cur = next;
  }
  return cur;
}

M permute_columns(const M& f, const std::vector<std::size_t>& perm) {
  M out(f.rows(), f.cols());
  for (std::size_t k = 0; k < perm.size(); ++k)
    for (std::size_t r = 0; r < f.rows(); ++r) out(r, k) = f(r, perm[k]);
  return out;
}

}  // namespace

TEST(BuildGraph, SpecExamples) {
  auto g = build_graph({{0, 10}, {5, 15}});
  ASSERT_EQ(g.edges.size(), 1u);
  EXPECT_EQ(g.edges[0].type, EdgeType::overlap);
  EXPECT_NEAR(g.edges[0].weight, 1.0 / 3.0, 1e-15);

  g = build_graph({{0, 10}, {11, 20}});
  EXPECT_TRUE(g.edges.empty());

  g = build_graph({{3, 4}});
  EXPECT_EQ(g.num_nodes, 1u);
  EXPECT_TRUE(g.edges.empty());
}

TEST(BuildGraph, NearbyEdge) {
  // Disjoint centers are at least a mean duration apart, so with theta 1 only
  // touching proposals qualify: centers 5 and 12.5, mean duration 7.5.
  auto g = build_graph({{0, 10}, {10, 15}, {100, 101}});
  ASSERT_EQ(g.edges.size(), 1u);
  EXPECT_EQ(g.edges[0].type, EdgeType::nearby);
  EXPECT_EQ(g.edges[0].i, 0u);
  EXPECT_EQ(g.edges[0].j, 1u);
  EXPECT_DOUBLE_EQ(g.edges[0].weight, 0.5);

  // centers 5 and 15.5, mean duration 9.5: distance 10.5 <= 2 * 9.5
  g = build_graph({{0, 10}, {11, 20}}, 2.0);
  ASSERT_EQ(g.edges.size(), 1u);
  EXPECT_DOUBLE_EQ(g.edges[0].weight, 1.0 / (1.0 + 10.5 / 9.5));
  EXPECT_TRUE(build_graph({{0, 10}, {11, 20}}, 1.0).edges.empty());
}

TEST(BuildGraph, EdgeInvariants) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const auto props = random_intervals(rng, 1 + rng() % 10);
    for (const Edge& e : build_graph(props, 1.5).edges) {
      EXPECT_LT(e.i, e.j);
      if (e.type == EdgeType::overlap) {
        EXPECT_GT(tiou(props[e.i], props[e.j]), 0.0);
      } else {
        EXPECT_EQ(tiou(props[e.i], props[e.j]), 0.0);
        EXPECT_LE(std::abs(props[e.i].center() - props[e.j].center()),
                  1.5 * 0.5 * (props[e.i].duration() + props[e.j].duration()));
      }
    }
  }
}

TEST(GraphConv, IsolatedNodesWithIdentitySelfAreUnchanged) {
  std::mt19937_64 rng(2);
  PNetParams<double> p = PNetParams<double>::init(PNetKind::pgcn_style, 4, 2, rng, "p");
  for (auto& l : p.graph_layers) l.self.value = M::identity(4);
  const M f = M::from_rows({{1, 0, 2}, {0.5, 3, 0}, {0, 0, 1}, {2, 1, 1}});
  const auto g = build_graph({{0, 1}, {50, 51}, {100, 101}});
  EXPECT_EQ(graph_conv_forward(g, f, p), f);
}

TEST(GraphConv, SymmetricPairStaysSymmetric) {
  std::mt19937_64 rng(3);
  PNetParams<double> p = PNetParams<double>::init(PNetKind::pgcn_style, 4, 2, rng, "p");
  const M col = random_matrix(rng, 4, 1);
  M f(4, 2);
  for (std::size_t r = 0; r < 4; ++r) f(r, 0) = f(r, 1) = col[r];
  const M out = graph_conv_forward(build_graph({{0, 10}, {5, 15}}), f, p);
  for (std::size_t r = 0; r < 4; ++r) EXPECT_EQ(out(r, 0), out(r, 1));
}

TEST(GraphConv, MatchesMessagePassingOracle) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng() % 6, d = 2 + rng() % 4;
    const auto props = random_intervals(rng, n, 20.0);
    PNetParams<double> p = PNetParams<double>::init(PNetKind::pgcn_style, d, 1 + trial % 3, rng, "p");
    const M f = random_matrix(rng, d, n);
    const M got = graph_conv_forward(build_graph(props, 1.5), f, p);
    const M want = ref_graph_conv(props, 1.5, f, p);
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
  }
}

TEST(GraphConv, ThreeNodeToyGraph) {
  std::mt19937_64 rng(5);
  PNetParams<double> p = PNetParams<double>::init(PNetKind::pgcn_style, 2, 1, rng, "p");
  const std::vector<Interval> props{{0, 10}, {5, 15}, {16, 20}};
  const M f = M::from_rows({{1, -1, 0.5}, {2, 0, -0.5}});
  const auto g = build_graph(props, 1.5);
  ASSERT_EQ(g.edges.size(), 2u);  // one overlap, one nearby
  const M got = graph_conv_forward(g, f, p);
  const M want = ref_graph_conv(props, 1.5, f, p);
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-14);
}

TEST(GraphConv, IsolatedNodeDependsOnlyOnItself) {
  std::mt19937_64 rng(6);
  PNetParams<double> p = PNetParams<double>::init(PNetKind::pgcn_style, 3, 2, rng, "p");
  const std::vector<Interval> props{{0, 4}, {2, 6}, {80, 82}};
  M f = random_matrix(rng, 3, 3);
  const M before = graph_conv_forward(build_graph(props), f, p);
  for (std::size_t r = 0; r < 3; ++r) f(r, 0) += 1.0;
  const M after = graph_conv_forward(build_graph(props), f, p);
  for (std::size_t r = 0; r < 3; ++r) EXPECT_EQ(before(r, 2), after(r, 2));
}

TEST(NonLocal, SingleProposal) {
  std::mt19937_64 rng(7);
  PNetParams<double> p = PNetParams<double>::init(PNetKind::nonlocal, 3, 1, rng, "p");
  const M f = random_matrix(rng, 3, 1);
  const M got = nonlocal_forward(f, p);
  const M wv = matmul(p.nonlocal_blocks[0].out.value, matmul(p.nonlocal_blocks[0].value.value, f));
  for (std::size_t r = 0; r < 3; ++r) EXPECT_NEAR(got[r], f[r] + wv[r], 1e-14);
}

TEST(NonLocal, ZeroOutputWeightIsIdentity) {
  std::mt19937_64 rng(8);
  PNetParams<double> p = PNetParams<double>::init(PNetKind::nonlocal, 3, 2, rng, "p");
  for (auto& b : p.nonlocal_blocks) b.out.value.fill(0.0);
  const M f = random_matrix(rng, 3, 4);
  EXPECT_EQ(nonlocal_forward(f, p), f);
}

TEST(NonLocal, MatchesPairwiseOracle) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng() % 5, d = 2 + rng() % 3;
    PNetParams<double> p = PNetParams<double>::init(PNetKind::nonlocal, d, 1 + trial % 2, rng, "p");
    const M f = random_matrix(rng, d, n);
    const M got = nonlocal_forward(f, p);
    const M want = ref_nonlocal(f, p);
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
  }
}

TEST(NonLocal, AttentionColumnsAreDistributions) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    Tape<double> t;
    const M logits = random_matrix(rng, 1 + rng() % 6, 1 + rng() % 6);
    const M s = ad::softmax_columns(t.constant(logits)).value();
    for (std::size_t c = 0; c < s.cols(); ++c) {
      double total = 0;
      for (std::size_t r = 0; r < s.rows(); ++r) {
        EXPECT_GE(s(r, c), 0.0);
        total += s(r, c);
      }
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
}

TEST(PNet, PermutationEquivariance) {
  std::mt19937_64 rng(11);
  for (PNetKind kind : {PNetKind::pgcn_style, PNetKind::nonlocal}) {
    for (int trial = 0; trial < 30; ++trial) {
      const std::size_t n = 2 + rng() % 5;
      const auto props = random_intervals(rng, n, 20.0);
      PNetParams<double> p = PNetParams<double>::init(kind, 4, 2, rng, "p");
      const M f = random_matrix(rng, 4, n);
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      std::vector<Interval> pprops;
      for (auto k : perm) pprops.push_back(props[k]);

      Tape<double> t1, t2;
      const M out = ad::pnet_forward(p, build_graph(props), t1.constant(f)).value();
      const M pout = ad::pnet_forward(p, build_graph(pprops), t2.constant(permute_columns(f, perm))).value();
      const M expected = permute_columns(out, perm);
      for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(pout[i], expected[i], 1e-12);
    }
  }
}

// P-Net mixes the global halves of different proposals: zeroing the z_G halves
// of every other proposal changes a proposal's output exactly when it is
// connected to at least one other proposal.
TEST(PNet, GlobalHalvesInteractOnlyThroughEdges) {
  std::mt19937_64 rng(12);
  const std::size_t d = 8, half = 4;
  const std::vector<Interval> props{{0, 10}, {5, 15}, {14, 20}, {200, 210}};
  const auto g = build_graph(props);
  std::vector<bool> connected(props.size(), false);
  for (const auto& e : g.edges) connected[e.i] = connected[e.j] = true;
  ASSERT_TRUE(connected[0]);
  ASSERT_FALSE(connected[3]);

  PNetParams<double> p = PNetParams<double>::init(PNetKind::pgcn_style, d, 2, rng, "p");
  M f = random_matrix(rng, d, props.size());
  for (auto& v : f.data()) v = std::abs(v);
  const M base = graph_conv_forward(g, f, p);
  for (std::size_t i = 0; i < props.size(); ++i) {
    M masked = f;
    for (std::size_t j = 0; j < props.size(); ++j)
      if (j != i)
        for (std::size_t r = half; r < d; ++r) masked(r, j) = 0.0;
    const M out = graph_conv_forward(g, masked, p);
    bool changed = false;
    for (std::size_t r = 0; r < d; ++r) changed = changed || out(r, i) != base(r, i);
    EXPECT_EQ(changed, connected[i]) << "proposal " << i;
  }

  // The complete graph of the non-local block connects any two proposals.
  PNetParams<double> nl = PNetParams<double>::init(PNetKind::nonlocal, d, 1, rng, "nl");
  M pair = random_matrix(rng, d, 2);
  const M pair_out = nonlocal_forward(pair, nl);
  for (std::size_t r = half; r < d; ++r) pair(r, 1) = 0.0;
  const M pair_masked = nonlocal_forward(pair, nl);
  bool changed = false;
  for (std::size_t r = 0; r < d; ++r) changed = changed || pair_out(r, 0) != pair_masked(r, 0);
  EXPECT_TRUE(changed);
}

TEST(PNet, DimensionMismatchThrows) {
  std::mt19937_64 rng(13);
  PNetParams<double> p = PNetParams<double>::init(PNetKind::pgcn_style, 4, 1, rng, "p");
  Tape<double> t;
  EXPECT_THROW(ad::pnet_forward(p, build_graph({{0, 1}}), t.constant(M(3, 1))), DimensionError);
  EXPECT_THROW(ad::pnet_forward(p, build_graph({{0, 1}, {2, 3}}), t.constant(M(4, 1))), DimensionError);
}

TEST(PNet, GradientsPassFiniteDifferences) {
  std::mt19937_64 rng(14);
  for (PNetKind kind : {PNetKind::pgcn_style, PNetKind::nonlocal}) {
    int checked = 0;
    for (int trial = 0; trial < 20; ++trial) {
      const auto props = random_intervals(rng, 4, 15.0);
      const auto g = build_graph(props);
      PNetParams<double> p = PNetParams<double>::init(kind, 4, 2, rng, "p");
      const M f = random_matrix(rng, 4, 4);
      auto build = [&](Tape<double>& t) {
        const auto out = ad::pnet_forward(p, g, t.constant(f));
        return ad::sum(ad::mul(out, out));
      };
      const auto report = finite_diff_check<double>(build, p.parameters(), 1e-6);
      if (report.min_kink_margin < 1e-3) continue;
      ++checked;
      EXPECT_LT(report.max_rel_error, 1e-4);
    }
    EXPECT_GE(checked, 5);
  }
}
