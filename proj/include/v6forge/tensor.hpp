#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "v6forge/errors.hpp"
#include "v6forge/rng.hpp"

namespace v6forge::num {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EMap = Eigen::Map<EMat>;
using ECMap = Eigen::Map<const EMat>;

inline std::string shape_text(std::span<const int> shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

/// Dense row-major double tensor of rank 0..3. Rank 0 is a scalar with one
/// element.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    validate_shape();
    data_.assign(count(), 0.0);
  }

  Tensor(std::vector<int> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape();
    if (data_.size() != count())
      throw ShapeError("data size " + std::to_string(data_.size()) + " does not match shape " +
                       shape_text(shape_));
  }

  static Tensor scalar(double v) { return Tensor({}, {v}); }

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<int> shape, double v) {
    Tensor t(std::move(shape));
    for (auto& x : t.data_) x = v;
    return t;
  }

  static Tensor uniform(std::vector<int> shape, double lo, double hi, rng::Engine& eng) {
    Tensor t(std::move(shape));
    for (auto& x : t.data_) x = rng::uniform(eng, lo, hi);
    return t;
  }

  int rank() const { return static_cast<int>(shape_.size()); }
  const std::vector<int>& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  int dim(int i) const {
    if (i < 0 || i >= rank()) throw IndexError("tensor axis out of range: " + std::to_string(i));
    return shape_[static_cast<std::size_t>(i)];
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(int i) { return data_[check_flat(i)]; }
  double at(int i) const { return data_[check_flat(i)]; }

  double& at(int i, int j) {
    require_rank(2);
    return data_[flat2(i, j)];
  }
  double at(int i, int j) const {
    require_rank(2);
    return data_[flat2(i, j)];
  }

  double& at(int i, int j, int k) {
    require_rank(3);
    return data_[flat3(i, j, k)];
  }
  double at(int i, int j, int k) const {
    require_rank(3);
    return data_[flat3(i, j, k)];
  }

  double item() const {
    if (data_.size() != 1) throw ShapeError("item() on tensor with shape " + shape_text(shape_));
    return data_[0];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  /// Rows of the trailing-axis matrix view: product of all leading dims.
  int lead() const { return rank() == 0 ? 1 : static_cast<int>(size()) / last(); }

  /// Size of the trailing axis (1 for scalars).
  int last() const { return rank() == 0 ? 1 : shape_.back(); }

  EMap mat() { return EMap(data_.data(), lead(), last()); }
  ECMap mat() const { return ECMap(data_.data(), lead(), last()); }

  /// Slab j of a rank-3 tensor viewed as a (d1, d2) matrix.
  EMap slab(int b) {
    require_rank(3);
    return EMap(data_.data() + static_cast<std::size_t>(b) * slab_size(), dim(1), dim(2));
  }
  ECMap slab(int b) const {
    require_rank(3);
    return ECMap(data_.data() + static_cast<std::size_t>(b) * slab_size(), dim(1), dim(2));
  }

  Tensor& operator+=(const Tensor& o) {
    if (!same_shape(o))
      throw ShapeError("cannot add " + shape_text(o.shape_) + " into " + shape_text(shape_));
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  void fill(double v) {
    for (auto& x : data_) x = v;
  }

  void scale_inplace(double c) {
    for (auto& x : data_) x *= c;
  }

  void add_scaled(const Tensor& o, double c) {
    if (!same_shape(o))
      throw ShapeError("cannot add " + shape_text(o.shape_) + " into " + shape_text(shape_));
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += c * o.data_[i];
  }

 private:
  void validate_shape() const {
    if (shape_.size() > 3) throw ShapeError("rank " + std::to_string(shape_.size()) + " exceeds 3");
    for (int d : shape_) {
      if (d <= 0) throw ShapeError("non-positive dimension in shape " + shape_text(shape_));
    }
  }

  std::size_t count() const {
    std::size_t n = 1;
    for (int d : shape_) n *= static_cast<std::size_t>(d);
    return n;
  }

  void require_rank(int r) const {
    if (rank() != r)
      throw ShapeError("expected rank " + std::to_string(r) + ", have " + shape_text(shape_));
  }

  std::size_t check_flat(int i) const {
    if (i < 0 || static_cast<std::size_t>(i) >= data_.size())
      throw IndexError("flat index out of range: " + std::to_string(i));
    return static_cast<std::size_t>(i);
  }

  std::size_t flat2(int i, int j) const {
    if (i < 0 || i >= shape_[0] || j < 0 || j >= shape_[1])
      throw IndexError("index (" + std::to_string(i) + "," + std::to_string(j) + ") out of range");
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(shape_[1]) +
           static_cast<std::size_t>(j);
  }

  std::size_t slab_size() const {
    return static_cast<std::size_t>(shape_[1]) * static_cast<std::size_t>(shape_[2]);
  }

  std::size_t flat3(int i, int j, int k) const {
    if (i < 0 || i >= shape_[0] || j < 0 || j >= shape_[1] || k < 0 || k >= shape_[2])
      throw IndexError("index (" + std::to_string(i) + "," + std::to_string(j) + "," +
                       std::to_string(k) + ") out of range");
    return (static_cast<std::size_t>(i) * static_cast<std::size_t>(shape_[1]) +
            static_cast<std::size_t>(j)) *
               static_cast<std::size_t>(shape_[2]) +
           static_cast<std::size_t>(k);
  }

  std::vector<int> shape_;
  std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("dot of vectors with different lengths");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// Cosine similarity with a 1e-12 floor on each norm.
inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  const double na = norm(a);
  const double nb = norm(b);
  return dot(a, b) / std::max(na * nb, 1e-12);
}

}  // namespace v6forge::num
