#pragma once

#include <cstddef>

namespace csem::kernels {

// The data-parallel inner loops behind every tensor op. The scalar kernels
// are the reference semantics; vector backends must reproduce them lane for
// lane on the non-reducing ops (no FMA contraction anywhere) and only differ
// from them by accumulation order on the reductions. kernels_test.cpp pins
// both contracts.
//
// All matrices are row-major, w[r * cols + c].
template <class T>
struct Ops {
  // y[i] += a * x[i]
  void (*axpy)(std::size_t n, T a, const T* x, T* y);
  // y[i] += x[i]
  void (*add)(std::size_t n, const T* x, T* y);
  // y[i] *= x[i]
  void (*mul)(std::size_t n, const T* x, T* y);
  // x[i] *= a
  void (*scale)(std::size_t n, T a, T* x);
  // returns sum_i x[i] * y[i]
  T (*dot)(std::size_t n, const T* x, const T* y);
  // y[r] += sum_c w[r][c] * x[c]
  void (*gemv_acc)(std::size_t rows, std::size_t cols, const T* w, const T* x,
                   T* y);
  // y[c] += sum_r w[r][c] * x[r]
  void (*gemv_t_acc)(std::size_t rows, std::size_t cols, const T* w,
                     const T* x, T* y);
  // w[r][c] += x[r] * y[c]
  void (*ger_acc)(std::size_t rows, std::size_t cols, T* w, const T* x,
                  const T* y);
};

enum class Backend { scalar, avx2 };

// Active backend. Chosen once, lazily: the CSEM_KERNELS environment variable
// ("scalar", "avx2", "auto") wins, otherwise the best supported backend.
const Ops<float>& f32();
const Ops<double>& f64();
Backend active();
const char* name();

bool supported(Backend b);
// Repoints the dispatch table; throws ConfigError if unsupported on this CPU.
// Not thread safe; intended for startup and tests.
void force(Backend b);

// Reference kernels, always available, for equivalence tests.
const Ops<float>& scalar_f32();
const Ops<double>& scalar_f64();

}  // namespace csem::kernels
