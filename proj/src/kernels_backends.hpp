#pragma once

#include "csem/kernels.hpp"

namespace csem::kernels::detail {

Ops<float> make_scalar_f32();
Ops<double> make_scalar_f64();

// Defined in kernels_avx2.cpp; null when the target or toolchain lacks AVX2.
const Ops<float>* avx2_f32();
const Ops<double>* avx2_f64();

}  // namespace csem::kernels::detail
