#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "contextloc/config.hpp"
#include "contextloc/context_nets.hpp"
#include "contextloc/datamodel.hpp"
#include "contextloc/eval.hpp"
#include "contextloc/numerics/tape.hpp"

namespace contextloc {

enum class EdgeType { overlap = 0, nearby = 1 };
inline constexpr std::size_t kEdgeTypes = 2;

struct Edge {
  std::size_t i = 0;  // i < j
  std::size_t j = 0;
  EdgeType type = EdgeType::overlap;
  double weight = 0.0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Undirected proposal graph; each edge is stored once with i < j.
struct ProposalGraph {
  std::size_t num_nodes = 0;
  std::vector<Edge> edges;
};

/// Overlapping proposals (tIoU > 0) are joined by an overlap edge weighted by
/// their tIoU. Disjoint proposals whose centers are at most
/// theta_near * (mean duration) apart are joined by a nearby edge weighted
/// 1 / (1 + distance / mean duration).
inline ProposalGraph build_graph(const std::vector<Interval>& proposals, double theta_near = 1.0) {
  ProposalGraph g;
  g.num_nodes = proposals.size();
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    for (std::size_t j = i + 1; j < proposals.size(); ++j) {
      const Interval& a = proposals[i];
      const Interval& b = proposals[j];
      const double iou = tiou(a, b);
      if (iou > 0.0) {
        g.edges.push_back({i, j, EdgeType::overlap, iou});
        continue;
      }
      const double mean_dur = 0.5 * (a.duration() + b.duration());
      const double dist = std::abs(a.center() - b.center());
      if (mean_dur > 0.0 && dist <= theta_near * mean_dur) {
        g.edges.push_back({i, j, EdgeType::nearby, 1.0 / (1.0 + dist / mean_dur)});
      }
    }
  }
  return g;
}

/// Row-normalized adjacency of one edge type: row i holds the weights of i's
/// neighbours of that type divided by their sum (all zero for no neighbours).
template <typename T>
Matrix<T> normalized_adjacency(const ProposalGraph& g, EdgeType type) {
  Matrix<T> a(g.num_nodes, g.num_nodes);
  for (const Edge& e : g.edges) {
    if (e.type != type) continue;
    a(e.i, e.j) += static_cast<T>(e.weight);
    a(e.j, e.i) += static_cast<T>(e.weight);
  }
  for (std::size_t i = 0; i < g.num_nodes; ++i) {
    T s = T(0);
    for (std::size_t j = 0; j < g.num_nodes; ++j) s += a(i, j);
    if (s > T(0))
      for (std::size_t j = 0; j < g.num_nodes; ++j) a(i, j) /= s;
  }
  return a;
}

template <typename T>
struct GraphConvLayer {
  Parameter<T> self;
  std::array<Parameter<T>, kEdgeTypes> edge;  // overlap, nearby
};

template <typename T>
struct NonLocalBlock {
  Parameter<T> query;
  Parameter<T> key;
  Parameter<T> value;
  Parameter<T> out;
};

/// Weights of one inter-proposal network operating on `dim`-dimensional
/// proposal features.
template <typename T>
struct PNetParams {
  PNetKind kind = PNetKind::pgcn_style;
  std::size_t dim = 0;
  std::vector<GraphConvLayer<T>> graph_layers;
  std::vector<NonLocalBlock<T>> nonlocal_blocks;

  static PNetParams init(PNetKind kind, std::size_t dim, int layers, std::mt19937_64& rng,
                         const std::string& prefix) {
    PNetParams p;
    p.kind = kind;
    p.dim = dim;
    for (int l = 0; l < layers; ++l) {
      const std::string base = prefix + "." + std::to_string(l) + ".";
      if (kind == PNetKind::pgcn_style) {
        GraphConvLayer<T> layer{init_weight<T>(base + "self", dim, dim, rng),
                                {init_weight<T>(base + "overlap", dim, dim, rng),
                                 init_weight<T>(base + "nearby", dim, dim, rng)}};
        p.graph_layers.push_back(std::move(layer));
      } else {
        NonLocalBlock<T> block{init_weight<T>(base + "query", dim, dim, rng), init_weight<T>(base + "key", dim, dim, rng),
                               init_weight<T>(base + "value", dim, dim, rng), init_weight<T>(base + "out", dim, dim, rng)};
        p.nonlocal_blocks.push_back(std::move(block));
      }
    }
    return p;
  }

  std::vector<Parameter<T>*> parameters() {
    std::vector<Parameter<T>*> out;
    for (auto& l : graph_layers) {
      out.push_back(&l.self);
      for (auto& e : l.edge) out.push_back(&e);
    }
    for (auto& b : nonlocal_blocks) {
      out.push_back(&b.query);
      out.push_back(&b.key);
      out.push_back(&b.value);
      out.push_back(&b.out);
    }
    return out;
  }
};

namespace ad {

/// One graph convolution over proposal features stored as columns:
/// F' = relu(W_self F + sum_t W_t F A_t^T).
template <typename T>
Var<T> graph_conv_layer(GraphConvLayer<T>& layer, const std::array<Var<T>, kEdgeTypes>& adjacency_t, Var<T> features) {
  Tape<T>& t = *features.tape;
  Var<T> acc = matmul(t.parameter(layer.self), features);
  for (std::size_t e = 0; e < kEdgeTypes; ++e) {
    acc = add(acc, matmul(t.parameter(layer.edge[e]), matmul(features, adjacency_t[e])));
  }
  return relu(acc);
}

/// Embedded-Gaussian non-local block with a residual connection:
/// f'_i = f_i + W_out sum_j softmax_j((W_q f_i).(W_k f_j)) W_v f_j.
template <typename T>
Var<T> nonlocal_block(NonLocalBlock<T>& block, Var<T> features) {
  Tape<T>& t = *features.tape;
  const Var<T> q = matmul(t.parameter(block.query), features);
  const Var<T> k = matmul(t.parameter(block.key), features);
  const Var<T> v = matmul(t.parameter(block.value), features);
  // Column i of `attn` is the distribution of proposal i over all j.
  const Var<T> attn = softmax_columns(matmul(transpose(k), q));
  return add(features, matmul(t.parameter(block.out), matmul(v, attn)));
}

/// Runs every layer of the network on features stored as the columns of a
/// dim x n matrix.
template <typename T>
Var<T> pnet_forward(PNetParams<T>& params, const ProposalGraph& graph, Var<T> features) {
  Tape<T>& t = *features.tape;
  if (features.rows() != params.dim) {
    throw DimensionError("pnet: features have " + std::to_string(features.rows()) + " rows, network expects " +
                         std::to_string(params.dim));
  }
  if (features.cols() != graph.num_nodes) throw DimensionError("pnet: feature count does not match graph nodes");
  Var<T> f = features;
  if (params.kind == PNetKind::pgcn_style) {
    const std::array<Var<T>, kEdgeTypes> adj{
        t.constant(normalized_adjacency<T>(graph, EdgeType::overlap).transposed()),
        t.constant(normalized_adjacency<T>(graph, EdgeType::nearby).transposed())};
    for (auto& layer : params.graph_layers) f = graph_conv_layer(layer, adj, f);
  } else {
    for (auto& block : params.nonlocal_blocks) f = nonlocal_block(block, f);
  }
  return f;
}

}  // namespace ad

/// Value-level graph convolution (all layers of `params`).
template <typename T>
Matrix<T> graph_conv_forward(const ProposalGraph& graph, const Matrix<T>& features, PNetParams<T>& params) {
  if (params.kind != PNetKind::pgcn_style) throw ContractError("graph_conv_forward: parameters are not graph-conv");
  Tape<T> t;
  return ad::pnet_forward(params, graph, t.constant(features)).value();
}

/// Value-level non-local network (all blocks of `params`).
template <typename T>
Matrix<T> nonlocal_forward(const Matrix<T>& features, PNetParams<T>& params) {
  if (params.kind != PNetKind::nonlocal) throw ContractError("nonlocal_forward: parameters are not non-local");
  Tape<T> t;
  ProposalGraph complete{features.cols(), {}};
  return ad::pnet_forward(params, complete, t.constant(features)).value();
}

}  // namespace contextloc
