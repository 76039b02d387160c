#include "kernels_backends.hpp"

namespace csem::kernels::detail {
namespace {

template <class T>
void axpy(std::size_t n, T a, const T* x, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

template <class T>
void add(std::size_t n, const T* x, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += x[i];
}

template <class T>
void mul(std::size_t n, const T* x, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] *= x[i];
}

template <class T>
void scale(std::size_t n, T a, T* x) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

template <class T>
T dot(std::size_t n, const T* x, const T* y) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

template <class T>
void gemv_acc(std::size_t rows, std::size_t cols, const T* w, const T* x,
              T* y) {
  for (std::size_t r = 0; r < rows; ++r) y[r] += dot(cols, w + r * cols, x);
}

template <class T>
void gemv_t_acc(std::size_t rows, std::size_t cols, const T* w, const T* x,
                T* y) {
  for (std::size_t r = 0; r < rows; ++r) axpy(cols, x[r], w + r * cols, y);
}

template <class T>
void ger_acc(std::size_t rows, std::size_t cols, T* w, const T* x,
             const T* y) {
  for (std::size_t r = 0; r < rows; ++r) axpy(cols, x[r], y, w + r * cols);
}

template <class T>
Ops<T> make() {
  Ops<T> ops;
  ops.axpy = &axpy<T>;
  ops.add = &add<T>;
  ops.mul = &mul<T>;
  ops.scale = &scale<T>;
  ops.dot = &dot<T>;
  ops.gemv_acc = &gemv_acc<T>;
  ops.gemv_t_acc = &gemv_t_acc<T>;
  ops.ger_acc = &ger_acc<T>;
  return ops;
}

}  // namespace

Ops<float> make_scalar_f32() { return make<float>(); }
Ops<double> make_scalar_f64() { return make<double>(); }

}  // namespace csem::kernels::detail
