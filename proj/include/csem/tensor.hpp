#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "csem/errors.hpp"
#include "csem/kernels.hpp"

namespace csem {

template <class T>
const kernels::Ops<T>& kops();
template <>
inline const kernels::Ops<float>& kops<float>() { return kernels::f32(); }
template <>
inline const kernels::Ops<double>& kops<double>() { return kernels::f64(); }

// Dense row-major array with shape. Training runs in float; the double
// instantiation exists for gradient checking.
template <class T>
class TensorT {
 public:
  TensorT() = default;

  explicit TensorT(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
    std::size_t n = 1;
    for (std::size_t d : shape_) {
      if (d == 0) throw ShapeError("tensor dimension must be positive");
      n *= d;
    }
    data_.assign(n, T{0});
  }

  TensorT(std::initializer_list<std::size_t> shape)
      : TensorT(std::vector<std::size_t>(shape)) {}

  static TensorT from(std::vector<std::size_t> shape, std::vector<T> data) {
    TensorT t(std::move(shape));
    if (data.size() != t.size()) {
      throw ShapeError("tensor data size does not match shape");
    }
    t.data_ = std::move(data);
    return t;
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_[i]; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  // Rank-2 accessors.
  T& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  const T& at(std::size_t i, std::size_t j) const {
    return data_[i * shape_[1] + j];
  }
  T* row(std::size_t i) { return data_.data() + i * shape_[1]; }
  const T* row(std::size_t i) const { return data_.data() + i * shape_[1]; }

  void fill(T v) { data_.assign(data_.size(), v); }
  void zero() { fill(T{0}); }

  bool same_shape(const TensorT& o) const { return shape_ == o.shape_; }

  void add_(const TensorT& o) {
    require_same_shape(o, "add");
    kops<T>().add(size(), o.data(), data());
  }
  void axpy_(T a, const TensorT& o) {
    require_same_shape(o, "axpy");
    kops<T>().axpy(size(), a, o.data(), data());
  }
  void mul_(const TensorT& o) {
    require_same_shape(o, "mul");
    kops<T>().mul(size(), o.data(), data());
  }
  void scale_(T a) { kops<T>().scale(size(), a, data()); }

  bool operator==(const TensorT& o) const {
    return shape_ == o.shape_ && data_ == o.data_;
  }

 private:
  void require_same_shape(const TensorT& o, const char* op) const {
    if (!same_shape(o)) {
      throw ShapeError(std::string(op) + ": shape mismatch " +
                       shape_string(*this) + " vs " + shape_string(o));
    }
  }

  std::vector<std::size_t> shape_;
  std::vector<T> data_;
};

using Tensor = TensorT<float>;
using DTensor = TensorT<double>;

template <class T>
std::string shape_string(const TensorT<T>& t) {
  std::string s = "[";
  for (std::size_t i = 0; i < t.rank(); ++i) {
    if (i) s += "x";
    s += std::to_string(t.dim(i));
  }
  return s + "]";
}

// C = A . B for rank-2 tensors, vectorized over the columns of B.
template <class T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw ShapeError("matmul requires rank-2 tensors, got " + shape_string(a) +
                     " and " + shape_string(b));
  }
  if (a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: inner dimensions differ, " + shape_string(a) +
                     " vs " + shape_string(b));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  TensorT<T> c({m, n});
  const auto& ops = kops<T>();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t t = 0; t < k; ++t) {
      ops.axpy(n, a.at(i, t), b.row(t), c.row(i));
    }
  }
  return c;
}

}  // namespace csem
