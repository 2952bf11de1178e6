#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "contextloc/error.hpp"
#include "contextloc/numerics/matrix.hpp"

namespace contextloc {

/// A trainable tensor together with its accumulated gradient.
template <typename T>
struct Parameter {
  std::string name;
  Matrix<T> value;
  Matrix<T> grad;

  Parameter() = default;
  Parameter(std::string n, Matrix<T> v)
      : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()) {}

  void zero_grad() { grad = Matrix<T>(value.rows(), value.cols()); }
  std::size_t count() const noexcept { return value.size(); }
};

template <typename T>
class Tape;

/// Handle to a node recorded on a tape.
template <typename T>
struct Var {
  Tape<T>* tape = nullptr;
  std::size_t id = 0;

  const Matrix<T>& value() const { return tape->value(id); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  T scalar() const { return value()[0]; }
};

/// Linear record of primitive ops for reverse-mode differentiation. Node ids are
/// assigned in creation order, and every op's inputs precede it, so walking ids
/// downward is a reverse topological order. A tape belongs to one computation;
/// do not share it across threads.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Matrix<T>& out_grad)>;

  struct Options {
    /// Test hook: perturbs the left-operand gradient of matmul so the gradient
    /// checker has something to catch.
    bool corrupt_matmul_grad = false;
  };

  Tape() = default;
  explicit Tape(Options options) : options_(options) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  const Options& options() const noexcept { return options_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  Var<T> constant(Matrix<T> value) {
    nodes_.push_back(Node{std::move(value), nullptr, nullptr, false});
    return Var<T>{this, nodes_.size() - 1};
  }

  /// Parameters are recorded once per tape; repeated calls return the same node.
  Var<T> parameter(Parameter<T>& p) {
    if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var<T>{this, it->second};
    nodes_.push_back(Node{p.value, nullptr, &p, true});
    const std::size_t id = nodes_.size() - 1;
    param_nodes_.emplace(&p, id);
    param_order_.push_back(id);
    return Var<T>{this, id};
  }

  /// Appends an op node. The backward closure only runs when some input needs
  /// a gradient and the node received one.
  Var<T> record(Matrix<T> value, std::initializer_list<std::size_t> inputs, BackwardFn backward) {
    return record(std::move(value), std::vector<std::size_t>(inputs), std::move(backward));
  }
  Var<T> record(Matrix<T> value, const std::vector<std::size_t>& inputs, BackwardFn backward) {
    const bool needs = std::any_of(inputs.begin(), inputs.end(),
                                   [&](std::size_t i) { return nodes_[i].requires_grad; });
    nodes_.push_back(Node{std::move(value), needs ? std::move(backward) : nullptr, nullptr, needs});
    return Var<T>{this, nodes_.size() - 1};
  }

  /// Distinct parameters recorded so far, in first-use order.
  std::vector<Parameter<T>*> recorded_parameters() const {
    std::vector<Parameter<T>*> out;
    for (std::size_t id : param_order_) out.push_back(nodes_[id].param);
    return out;
  }

  const Matrix<T>& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }

  /// Gradient buffer for a node, allocated as zeros on first use.
  Matrix<T>& grad(std::size_t id) {
    Matrix<T>& g = grads_.at(id);
    if (g.empty() && !nodes_[id].value.empty()) {
      g = Matrix<T>(nodes_[id].value.rows(), nodes_[id].value.cols());
    }
    return g;
  }
  const Matrix<T>& grad_or_empty(std::size_t id) const { return grads_.at(id); }

  /// Runs the recorded ops in reverse and adds the resulting gradients into
  /// every parameter recorded on this tape. Returns the ids whose backward
  /// closure ran, in visit order.
  std::vector<std::size_t> backward(Var<T> loss) {
    if (loss.tape != this) throw ContractError("backward: loss belongs to another tape");
    const Matrix<T>& lv = value(loss.id);
    if (lv.rows() != 1 || lv.cols() != 1) {
      throw ContractError("backward: loss must be scalar, got " + lv.shape_string());
    }
    grads_.assign(nodes_.size(), Matrix<T>());
    grad(loss.id)[0] = T(1);
    std::vector<std::size_t> visited;
    for (std::size_t id = loss.id + 1; id-- > 0;) {
      Node& node = nodes_[id];
      if (!node.backward || grads_[id].empty()) continue;
      visited.push_back(id);
      const Matrix<T>& g = grads_[id];
      node.backward(*this, g);
    }
    for (std::size_t id : param_order_) {
      if (!grads_[id].empty()) nodes_[id].param->grad += grads_[id];
    }
    return visited;
  }

  /// Smallest distance of any recorded piecewise-linear op input from its kink
  /// (ReLU at 0, smooth-L1 at |u|=1). Finite-difference checks near a kink are
  /// meaningless, so callers re-sample when this is small.
  T min_kink_margin() const noexcept { return min_kink_margin_; }
  void note_kink_distance(T d) noexcept { min_kink_margin_ = std::min(min_kink_margin_, d); }

 private:
  struct Node {
    Matrix<T> value;
    BackwardFn backward;
    Parameter<T>* param;
    bool requires_grad;
  };

  Options options_{};
  std::vector<Node> nodes_;
  std::vector<Matrix<T>> grads_;
  std::unordered_map<const Parameter<T>*, std::size_t> param_nodes_;
  std::vector<std::size_t> param_order_;
  T min_kink_margin_ = std::numeric_limits<T>::infinity();
};

namespace ad {

namespace detail {
template <typename T>
void require_column(const Matrix<T>& m, const char* what) {
  if (!m.is_column()) throw DimensionError(std::string(what) + ": expected column vector, got " + m.shape_string());
}
template <typename T>
Tape<T>& same_tape(Var<T> a, Var<T> b) {
  if (a.tape != b.tape || a.tape == nullptr) throw ContractError("operands recorded on different tapes");
  return *a.tape;
}
}  // namespace detail

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  Tape<T>& t = detail::same_tape(a, b);
  Matrix<T> out = contextloc::matmul(a.value(), b.value());
  const std::size_t ia = a.id, ib = b.id;
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape<T>& tp, const Matrix<T>& g) {
    const Matrix<T>& av = tp.value(ia);
    const Matrix<T>& bv = tp.value(ib);
    if (tp.requires_grad(ia)) {
      Matrix<T>& ga = tp.grad(ia);
      const T k = tp.options().corrupt_matmul_grad ? T(1.1) : T(1);
      for (std::size_t i = 0; i < av.rows(); ++i)
        for (std::size_t j = 0; j < bv.cols(); ++j) {
          const T gij = k * g(i, j);
          for (std::size_t c = 0; c < av.cols(); ++c) ga(i, c) += gij * bv(c, j);
        }
    }
    if (tp.requires_grad(ib)) {
      Matrix<T>& gb = tp.grad(ib);
      for (std::size_t i = 0; i < av.rows(); ++i)
        for (std::size_t c = 0; c < av.cols(); ++c) {
          const T aic = av(i, c);
          for (std::size_t j = 0; j < bv.cols(); ++j) gb(c, j) += aic * g(i, j);
        }
    }
  });
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  Tape<T>& t = detail::same_tape(a, b);
  a.value().require_same_shape(b.value(), "add");
  Matrix<T> out = a.value();
  out += b.value();
  const std::size_t ia = a.id, ib = b.id;
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape<T>& tp, const Matrix<T>& g) {
    if (tp.requires_grad(ia)) tp.grad(ia) += g;
    if (tp.requires_grad(ib)) tp.grad(ib) += g;
  });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  Tape<T>& t = detail::same_tape(a, b);
  a.value().require_same_shape(b.value(), "sub");
  Matrix<T> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  const std::size_t ia = a.id, ib = b.id;
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape<T>& tp, const Matrix<T>& g) {
    if (tp.requires_grad(ia)) tp.grad(ia) += g;
    if (tp.requires_grad(ib)) {
      Matrix<T>& gb = tp.grad(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

template <typename T>
Var<T> scale(Var<T> a, T c) {
  Matrix<T> out = a.value();
  for (auto& v : out.data()) v *= c;
  const std::size_t ia = a.id;
  return a.tape->record(std::move(out), {ia}, [ia, c](Tape<T>& tp, const Matrix<T>& g) {
    Matrix<T>& ga = tp.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
  });
}

/// Elementwise product.
template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  Tape<T>& t = detail::same_tape(a, b);
  a.value().require_same_shape(b.value(), "mul");
  Matrix<T> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  const std::size_t ia = a.id, ib = b.id;
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape<T>& tp, const Matrix<T>& g) {
    const Matrix<T>& av = tp.value(ia);
    const Matrix<T>& bv = tp.value(ib);
    if (tp.requires_grad(ia)) {
      Matrix<T>& ga = tp.grad(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (tp.requires_grad(ib)) {
      Matrix<T>& gb = tp.grad(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

template <typename T>
Var<T> relu(Var<T> a) {
  Matrix<T> out = a.value();
  T margin = std::numeric_limits<T>::infinity();
  for (auto& v : out.data()) {
    margin = std::min(margin, std::abs(v));
    v = nan_relu(v);
  }
  const std::size_t ia = a.id;
  Var<T> r = a.tape->record(std::move(out), {ia}, [ia](Tape<T>& tp, const Matrix<T>& g) {
    const Matrix<T>& av = tp.value(ia);
    Matrix<T>& ga = tp.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (av[i] > T(0)) ga[i] += g[i];
  });
  if (a.tape->requires_grad(ia)) a.tape->note_kink_distance(margin);
  return r;
}

template <typename T>
Var<T> dot(Var<T> a, Var<T> b) {
  Tape<T>& t = detail::same_tape(a, b);
  a.value().require_same_shape(b.value(), "dot");
  const T d = contextloc::dot<T>(a.value().span(), b.value().span());
  const std::size_t ia = a.id, ib = b.id;
  return t.record(Matrix<T>::scalar(d), {ia, ib}, [ia, ib](Tape<T>& tp, const Matrix<T>& g) {
    const Matrix<T>& av = tp.value(ia);
    const Matrix<T>& bv = tp.value(ib);
    if (tp.requires_grad(ia)) {
      Matrix<T>& ga = tp.grad(ia);
      for (std::size_t i = 0; i < av.size(); ++i) ga[i] += g[0] * bv[i];
    }
    if (tp.requires_grad(ib)) {
      Matrix<T>& gb = tp.grad(ib);
      for (std::size_t i = 0; i < av.size(); ++i) gb[i] += g[0] * av[i];
    }
  });
}

template <typename T>
Var<T> norm(Var<T> a) {
  const T n = contextloc::norm<T>(a.value().span());
  const std::size_t ia = a.id;
  return a.tape->record(Matrix<T>::scalar(n), {ia}, [ia, n](Tape<T>& tp, const Matrix<T>& g) {
    if (n == T(0)) return;  // subgradient 0 at the origin
    const Matrix<T>& av = tp.value(ia);
    Matrix<T>& ga = tp.grad(ia);
    for (std::size_t i = 0; i < av.size(); ++i) ga[i] += g[0] * av[i] / n;
  });
}

/// Cosine similarity with the zero-norm convention of cosine_similarity();
/// the degenerate branch is constant, so it contributes no gradient.
template <typename T>
Var<T> cosine(Var<T> a, Var<T> b) {
  Tape<T>& t = detail::same_tape(a, b);
  const T c = contextloc::cosine_similarity<T>(a.value().span(), b.value().span());
  const std::size_t ia = a.id, ib = b.id;
  return t.record(Matrix<T>::scalar(c), {ia, ib}, [ia, ib, c](Tape<T>& tp, const Matrix<T>& g) {
    const Matrix<T>& av = tp.value(ia);
    const Matrix<T>& bv = tp.value(ib);
    const T na = contextloc::norm<T>(av.span());
    const T nb = contextloc::norm<T>(bv.span());
    if (na < T(kCosineEps) || nb < T(kCosineEps)) return;
    const T inv = T(1) / (na * nb);
    if (tp.requires_grad(ia)) {
      Matrix<T>& ga = tp.grad(ia);
      for (std::size_t i = 0; i < av.size(); ++i)
        ga[i] += g[0] * (bv[i] * inv - c * av[i] / (na * na));
    }
    if (tp.requires_grad(ib)) {
      Matrix<T>& gb = tp.grad(ib);
      for (std::size_t i = 0; i < bv.size(); ++i)
        gb[i] += g[0] * (av[i] * inv - c * bv[i] / (nb * nb));
    }
  });
}

/// Stacks column vectors (or scalars) end to end.
template <typename T>
Var<T> concat(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  std::vector<T> data;
  std::vector<std::size_t> ids;
  std::vector<std::size_t> offsets;
  for (const Var<T>& p : parts) {
    detail::same_tape(parts.front(), p);
    detail::require_column(p.value(), "concat");
    offsets.push_back(data.size());
    ids.push_back(p.id);
    data.insert(data.end(), p.value().data().begin(), p.value().data().end());
  }
  Tape<T>& t = *parts.front().tape;
  return t.record(Matrix<T>::column(std::move(data)), ids,
                  [ids, offsets](Tape<T>& tp, const Matrix<T>& g) {
                    for (std::size_t k = 0; k < ids.size(); ++k) {
                      if (!tp.requires_grad(ids[k])) continue;
                      Matrix<T>& gk = tp.grad(ids[k]);
                      for (std::size_t i = 0; i < gk.size(); ++i) gk[i] += g[offsets[k] + i];
                    }
                  });
}

/// Places column vectors side by side as the columns of a matrix.
template <typename T>
Var<T> hstack(const std::vector<Var<T>>& columns) {
  if (columns.empty()) throw ContractError("hstack: no inputs");
  const std::size_t rows = columns.front().rows();
  Matrix<T> out(rows, columns.size());
  std::vector<std::size_t> ids;
  for (std::size_t j = 0; j < columns.size(); ++j) {
    detail::same_tape(columns.front(), columns[j]);
    const Matrix<T>& c = columns[j].value();
    detail::require_column(c, "hstack");
    if (c.rows() != rows) throw DimensionError("hstack: column heights differ");
    for (std::size_t i = 0; i < rows; ++i) out(i, j) = c[i];
    ids.push_back(columns[j].id);
  }
  Tape<T>& t = *columns.front().tape;
  return t.record(std::move(out), ids, [ids](Tape<T>& tp, const Matrix<T>& g) {
    for (std::size_t j = 0; j < ids.size(); ++j) {
      if (!tp.requires_grad(ids[j])) continue;
      Matrix<T>& gj = tp.grad(ids[j]);
      for (std::size_t i = 0; i < gj.size(); ++i) gj[i] += g(i, j);
    }
  });
}

/// Column j of a matrix as a column vector.
template <typename T>
Var<T> column(Var<T> m, std::size_t j) {
  const Matrix<T>& mv = m.value();
  if (j >= mv.cols()) throw DimensionError("column: index out of range");
  Matrix<T> out(mv.rows(), 1);
  for (std::size_t i = 0; i < mv.rows(); ++i) out[i] = mv(i, j);
  const std::size_t im = m.id;
  return m.tape->record(std::move(out), {im}, [im, j](Tape<T>& tp, const Matrix<T>& g) {
    Matrix<T>& gm = tp.grad(im);
    for (std::size_t i = 0; i < g.size(); ++i) gm(i, j) += g[i];
  });
}

template <typename T>
Var<T> slice(Var<T> a, std::size_t offset, std::size_t length) {
  detail::require_column(a.value(), "slice");
  if (offset + length > a.rows()) throw DimensionError("slice: range exceeds vector length");
  const auto& av = a.value().data();
  Matrix<T> out = Matrix<T>::column(std::vector<T>(av.begin() + offset, av.begin() + offset + length));
  const std::size_t ia = a.id;
  return a.tape->record(std::move(out), {ia}, [ia, offset](Tape<T>& tp, const Matrix<T>& g) {
    Matrix<T>& ga = tp.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[offset + i] += g[i];
  });
}

template <typename T>
Var<T> element(Var<T> a, std::size_t index) {
  return slice(a, index, 1);
}

template <typename T>
Var<T> transpose(Var<T> a) {
  const std::size_t ia = a.id;
  return a.tape->record(a.value().transposed(), {ia}, [ia](Tape<T>& tp, const Matrix<T>& g) {
    Matrix<T>& ga = tp.grad(ia);
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < g.cols(); ++c) ga(c, r) += g(r, c);
  });
}

template <typename T>
Var<T> sum(Var<T> a) {
  T s = T(0);
  for (T v : a.value().data()) s += v;
  const std::size_t ia = a.id;
  return a.tape->record(Matrix<T>::scalar(s), {ia}, [ia](Tape<T>& tp, const Matrix<T>& g) {
    Matrix<T>& ga = tp.grad(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
  });
}

/// Divides nonnegative scores by their sum. When the sum is below eps the
/// output is the uniform distribution, which does not depend on the scores.
template <typename T>
Var<T> normalize_sum(Var<T> scores, T eps) {
  detail::require_column(scores.value(), "normalize_sum");
  const Matrix<T>& s = scores.value();
  const std::size_t k = s.size();
  if (k == 0) throw ContractError("normalize_sum: empty score vector");
  T total = T(0);
  for (T v : s.data()) total += v;
  const std::size_t is = scores.id;
  if (total < eps) {
    return scores.tape->constant(Matrix<T>(k, 1, T(1) / static_cast<T>(k)));
  }
  Matrix<T> out = s;
  for (auto& v : out.data()) v /= total;
  return scores.tape->record(std::move(out), {is}, [is, total](Tape<T>& tp, const Matrix<T>& g) {
    const Matrix<T>& sv = tp.value(is);
    T gs = T(0);
    for (std::size_t i = 0; i < g.size(); ++i) gs += g[i] * sv[i];
    Matrix<T>& ga = tp.grad(is);
    for (std::size_t j = 0; j < g.size(); ++j) ga[j] += g[j] / total - gs / (total * total);
  });
}

/// Softmax applied independently to each column.
template <typename T>
Var<T> softmax_columns(Var<T> a) {
  const Matrix<T>& av = a.value();
  Matrix<T> out(av.rows(), av.cols());
  for (std::size_t c = 0; c < av.cols(); ++c) {
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t r = 0; r < av.rows(); ++r) mx = std::max(mx, av(r, c));
    T z = T(0);
    for (std::size_t r = 0; r < av.rows(); ++r) z += (out(r, c) = std::exp(av(r, c) - mx));
    for (std::size_t r = 0; r < av.rows(); ++r) out(r, c) /= z;
  }
  const std::size_t ia = a.id;
  return a.tape->record(out, {ia}, [ia, out](Tape<T>& tp, const Matrix<T>& g) {
    Matrix<T>& ga = tp.grad(ia);
    for (std::size_t c = 0; c < out.cols(); ++c) {
      T inner = T(0);
      for (std::size_t r = 0; r < out.rows(); ++r) inner += g(r, c) * out(r, c);
      for (std::size_t r = 0; r < out.rows(); ++r) ga(r, c) += out(r, c) * (g(r, c) - inner);
    }
  });
}

/// -log softmax(logits)[label].
template <typename T>
Var<T> cross_entropy(Var<T> logits, std::size_t label) {
  detail::require_column(logits.value(), "cross_entropy");
  const Matrix<T>& lv = logits.value();
  if (label >= lv.size()) throw DimensionError("cross_entropy: label out of range");
  T mx = -std::numeric_limits<T>::infinity();
  for (T v : lv.data()) mx = std::max(mx, v);
  T z = T(0);
  for (T v : lv.data()) z += std::exp(v - mx);
  const T loss = std::log(z) + mx - lv[label];
  const std::size_t il = logits.id;
  return logits.tape->record(Matrix<T>::scalar(loss), {il},
                             [il, label, mx, z](Tape<T>& tp, const Matrix<T>& g) {
                               const Matrix<T>& v = tp.value(il);
                               Matrix<T>& gl = tp.grad(il);
                               for (std::size_t i = 0; i < v.size(); ++i) {
                                 const T p = std::exp(v[i] - mx) / z;
                                 gl[i] += g[0] * (p - (i == label ? T(1) : T(0)));
                               }
                             });
}

/// sum_i (0.5 u_i^2 if |u_i| < 1 else |u_i| - 0.5)
template <typename T>
Var<T> smooth_l1(Var<T> a) {
  T s = T(0);
  T margin = std::numeric_limits<T>::infinity();
  for (T u : a.value().data()) {
    const T au = std::abs(u);
    s += au < T(1) ? T(0.5) * u * u : au - T(0.5);
    margin = std::min(margin, std::abs(au - T(1)));
  }
  const std::size_t ia = a.id;
  Var<T> r = a.tape->record(Matrix<T>::scalar(s), {ia}, [ia](Tape<T>& tp, const Matrix<T>& g) {
    const Matrix<T>& av = tp.value(ia);
    Matrix<T>& ga = tp.grad(ia);
    for (std::size_t i = 0; i < av.size(); ++i) {
      const T u = av[i];
      const T d = std::abs(u) < T(1) ? u : (u > T(0) ? T(1) : T(-1));
      ga[i] += g[0] * d;
    }
  });
  if (a.tape->requires_grad(ia)) a.tape->note_kink_distance(margin);
  return r;
}

/// Row-wise maximum over the columns of a matrix; the gradient of each output
/// entry goes to the first column attaining the maximum.
template <typename T>
Var<T> max_pool_columns(Var<T> m) {
  const Matrix<T>& mv = m.value();
  if (mv.cols() == 0) throw ContractError("max_pool_columns: no columns");
  Matrix<T> out(mv.rows(), 1);
  std::vector<std::size_t> argmax(mv.rows(), 0);
  for (std::size_t r = 0; r < mv.rows(); ++r) {
    out[r] = mv(r, 0);
    for (std::size_t c = 1; c < mv.cols(); ++c)
      if (out[r] == out[r] && !(mv(r, c) <= out[r])) {
        out[r] = mv(r, c);
        argmax[r] = c;
      }
    if (m.tape->requires_grad(m.id)) {
      for (std::size_t c = 0; c < mv.cols(); ++c)
        if (c != argmax[r]) m.tape->note_kink_distance(out[r] - mv(r, c));
    }
  }
  const std::size_t im = m.id;
  return m.tape->record(std::move(out), {im}, [im, argmax](Tape<T>& tp, const Matrix<T>& g) {
    Matrix<T>& gm = tp.grad(im);
    for (std::size_t r = 0; r < g.size(); ++r) gm(r, argmax[r]) += g[r];
  });
}

/// Arithmetic mean of scalar nodes; an empty list yields a constant zero.
template <typename T>
Var<T> mean(Tape<T>& tape, const std::vector<Var<T>>& scalars) {
  if (scalars.empty()) return tape.constant(Matrix<T>::scalar(T(0)));
  return scale(sum(concat(scalars)), T(1) / static_cast<T>(scalars.size()));
}

}  // namespace ad
}  // namespace contextloc
