#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "contextloc/error.hpp"

namespace contextloc {

/// max and ReLU that keep NaN, so corrupted inputs reach the loss check
/// instead of being dropped by a comparison.
template <typename T>
constexpr T nan_max(T a, T b) {
  return (a != a || a >= b) ? a : b;
}

template <typename T>
constexpr T nan_relu(T v) {
  return v < T(0) ? T(0) : v;
}

/// Dense row-major matrix. Column vectors are matrices with one column.
template <typename T>
class Matrix {
 public:
  using value_type = T;

  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T(0))
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw DimensionError("matrix data length " + std::to_string(data_.size()) +
                           " does not match shape " + shape_string());
    }
  }

  static Matrix column(std::vector<T> values) {
    const std::size_t n = values.size();
    return Matrix(n, 1, std::move(values));
  }
  static Matrix column(std::initializer_list<T> values) {
    return column(std::vector<T>(values));
  }
  static Matrix scalar(T value) { return Matrix(1, 1, value); }
  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = T(1);
    return m;
  }
  /// Row-major construction from nested lists, for tests and small fixtures.
  static Matrix from_rows(std::initializer_list<std::initializer_list<T>> rows) {
    std::vector<T> data;
    std::size_t cols = rows.size() ? rows.begin()->size() : 0;
    for (const auto& r : rows) {
      if (r.size() != cols) throw DimensionError("ragged row list");
      data.insert(data.end(), r.begin(), r.end());
    }
    return Matrix(rows.size(), cols, std::move(data));
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  bool is_column() const noexcept { return cols_ == 1; }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> span() noexcept { return data_; }
  std::span<const T> span() const noexcept { return data_; }
  std::span<const T> row(std::size_t r) const {
    return std::span<const T>(data_).subspan(r * cols_, cols_);
  }
  const std::vector<T>& data() const noexcept { return data_; }
  std::vector<T>& data() noexcept { return data_; }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  Matrix transposed() const {
    Matrix out(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) out(c, r) = (*this)(r, c);
    return out;
  }

  Matrix& operator+=(const Matrix& other) {
    require_same_shape(other, "+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  std::string shape_string() const {
    return "(" + std::to_string(rows_) + "x" + std::to_string(cols_) + ")";
  }

  void require_same_shape(const Matrix& other, const char* what) const {
    if (rows_ != other.rows_ || cols_ != other.cols_) {
      throw DimensionError(std::string(what) + ": shape " + shape_string() + " vs " +
                           other.shape_string());
    }
  }

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

/// out = a * b
template <typename T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: " + a.shape_string() + " * " + b.shape_string());
  }
  Matrix<T> out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const T aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  }
  return out;
}

template <typename T>
T dot(std::span<const T> u, std::span<const T> v) {
  if (u.size() != v.size()) {
    throw DimensionError("dot: lengths " + std::to_string(u.size()) + " and " +
                         std::to_string(v.size()));
  }
  T acc = T(0);
  for (std::size_t i = 0; i < u.size(); ++i) acc += u[i] * v[i];
  return acc;
}

template <typename T>
T norm(std::span<const T> u) {
  return std::sqrt(dot(u, u));
}

/// Norms below this are treated as zero by cosine_similarity.
inline constexpr double kCosineEps = 1e-12;

/// u.v / (|u||v|), or 0 when either vector is (numerically) zero.
template <typename T>
T cosine_similarity(std::span<const T> u, std::span<const T> v) {
  if (u.size() != v.size()) {
    throw DimensionError("cosine_similarity: lengths " + std::to_string(u.size()) + " and " +
                         std::to_string(v.size()));
  }
  if (u.empty()) throw DimensionError("cosine_similarity: empty vectors");
  const T nu = norm(u);
  const T nv = norm(v);
  if (nu < T(kCosineEps) || nv < T(kCosineEps)) return T(0);
  return dot(u, v) / (nu * nv);
}

template <typename T>
T cosine_similarity(const Matrix<T>& u, const Matrix<T>& v) {
  return cosine_similarity<T>(u.span(), v.span());
}

template <typename T>
struct WeightedInput {
  T coeff;
  Matrix<T> vec;
};

/// relu(sum_k coeff_k * W * v_k). The building block of both context transforms.
template <typename T>
Matrix<T> relu_affine(const Matrix<T>& w, const std::vector<WeightedInput<T>>& inputs) {
  Matrix<T> acc(w.rows(), 1);
  for (const auto& in : inputs) {
    if (!in.vec.is_column() || in.vec.rows() != w.cols()) {
      throw DimensionError("relu_affine: input " + in.vec.shape_string() +
                           " against weight " + w.shape_string());
    }
    const Matrix<T> wv = matmul(w, in.vec);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += in.coeff * wv[i];
  }
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] = nan_relu(acc[i]);
  return acc;
}

/// Elementwise maximum over a nonempty list of equal-length vectors.
template <typename T>
Matrix<T> max_pool(const std::vector<Matrix<T>>& features) {
  if (features.empty()) throw ContractError("max_pool: empty feature list");
  Matrix<T> out = features.front();
  for (std::size_t k = 1; k < features.size(); ++k) {
    features[k].require_same_shape(out, "max_pool");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = nan_max(out[i], features[k][i]);
  }
  return out;
}

}  // namespace contextloc
