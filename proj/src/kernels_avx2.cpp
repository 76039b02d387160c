// AVX2 variants of the inner-loop kernels. This translation unit is the only
// one compiled with -mavx2; dispatch checks the CPU at runtime before these
// are ever called. Elementwise ops use separate mul/add (no FMA) so each lane
// rounds exactly like the scalar reference; reductions differ from scalar
// only by accumulation order.

#include "kernels_backends.hpp"

#if defined(__AVX2__) && (defined(__x86_64__) || defined(__i386__))

#include <immintrin.h>

namespace csem::kernels::detail {
namespace {

inline float hsum(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  __m128 s = _mm_add_ps(lo, hi);
  s = _mm_add_ps(s, _mm_movehl_ps(s, s));
  s = _mm_add_ss(s, _mm_shuffle_ps(s, s, 1));
  return _mm_cvtss_f32(s);
}

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  __m128d s = _mm_add_pd(lo, hi);
  s = _mm_add_sd(s, _mm_unpackhi_pd(s, s));
  return _mm_cvtsd_f64(s);
}

// ---- float, 8 lanes ----

void axpy_f32(std::size_t n, float a, const float* x, float* y) {
  __m256 va = _mm256_set1_ps(a);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 vy = _mm256_loadu_ps(y + i);
    vy = _mm256_add_ps(vy, _mm256_mul_ps(va, _mm256_loadu_ps(x + i)));
    _mm256_storeu_ps(y + i, vy);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void add_f32(std::size_t n, const float* x, float* y) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(
        y + i, _mm256_add_ps(_mm256_loadu_ps(y + i), _mm256_loadu_ps(x + i)));
  }
  for (; i < n; ++i) y[i] += x[i];
}

void mul_f32(std::size_t n, const float* x, float* y) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(
        y + i, _mm256_mul_ps(_mm256_loadu_ps(y + i), _mm256_loadu_ps(x + i)));
  }
  for (; i < n; ++i) y[i] *= x[i];
}

void scale_f32(std::size_t n, float a, float* x) {
  __m256 va = _mm256_set1_ps(a);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(x + i, _mm256_mul_ps(va, _mm256_loadu_ps(x + i)));
  }
  for (; i < n; ++i) x[i] *= a;
}

float dot_f32(std::size_t n, const float* x, const float* y) {
  __m256 acc = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc = _mm256_add_ps(acc,
                        _mm256_mul_ps(_mm256_loadu_ps(x + i),
                                      _mm256_loadu_ps(y + i)));
  }
  float total = hsum(acc);
  for (; i < n; ++i) total += x[i] * y[i];
  return total;
}

void gemv_acc_f32(std::size_t rows, std::size_t cols, const float* w,
                  const float* x, float* y) {
  for (std::size_t r = 0; r < rows; ++r) y[r] += dot_f32(cols, w + r * cols, x);
}

void gemv_t_acc_f32(std::size_t rows, std::size_t cols, const float* w,
                    const float* x, float* y) {
  for (std::size_t r = 0; r < rows; ++r) axpy_f32(cols, x[r], w + r * cols, y);
}

void ger_acc_f32(std::size_t rows, std::size_t cols, float* w, const float* x,
                 const float* y) {
  for (std::size_t r = 0; r < rows; ++r) axpy_f32(cols, x[r], y, w + r * cols);
}

// ---- double, 4 lanes ----

void axpy_f64(std::size_t n, double a, const double* x, double* y) {
  __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_add_pd(vy, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void add_f64(std::size_t n, const double* x, double* y) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(
        y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) y[i] += x[i];
}

void mul_f64(std::size_t n, const double* x, double* y) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(
        y + i, _mm256_mul_pd(_mm256_loadu_pd(y + i), _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) y[i] *= x[i];
}

void scale_f64(std::size_t n, double a, double* x) {
  __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) x[i] *= a;
}

double dot_f64(std::size_t n, const double* x, const double* y) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_add_pd(acc,
                        _mm256_mul_pd(_mm256_loadu_pd(x + i),
                                      _mm256_loadu_pd(y + i)));
  }
  double total = hsum(acc);
  for (; i < n; ++i) total += x[i] * y[i];
  return total;
}

void gemv_acc_f64(std::size_t rows, std::size_t cols, const double* w,
                  const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) y[r] += dot_f64(cols, w + r * cols, x);
}

void gemv_t_acc_f64(std::size_t rows, std::size_t cols, const double* w,
                    const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) axpy_f64(cols, x[r], w + r * cols, y);
}

void ger_acc_f64(std::size_t rows, std::size_t cols, double* w,
                 const double* x, const double* y) {
  for (std::size_t r = 0; r < rows; ++r) axpy_f64(cols, x[r], y, w + r * cols);
}

const Ops<float> kF32 = {axpy_f32,     add_f32,        mul_f32,
                         scale_f32,    dot_f32,        gemv_acc_f32,
                         gemv_t_acc_f32, ger_acc_f32};
const Ops<double> kF64 = {axpy_f64,     add_f64,        mul_f64,
                          scale_f64,    dot_f64,        gemv_acc_f64,
                          gemv_t_acc_f64, ger_acc_f64};

}  // namespace

const Ops<float>* avx2_f32() { return &kF32; }
const Ops<double>* avx2_f64() { return &kF64; }

}  // namespace csem::kernels::detail

#else  // no AVX2 in this build

namespace csem::kernels::detail {

const Ops<float>* avx2_f32() { return nullptr; }
const Ops<double>* avx2_f64() { return nullptr; }

}  // namespace csem::kernels::detail

#endif
