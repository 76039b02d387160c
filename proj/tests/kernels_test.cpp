#include <cmath>
#include <vector>

#include "csem/kernels.hpp"
#include "csem/rng.hpp"
#include "doctest.h"
#include "testutil.hpp"

using namespace csem;

namespace {

// Sizes straddling the 8/4-lane boundaries plus the remainder tails.
const std::vector<std::size_t> kSizes = {1, 2, 3, 4, 5, 7, 8, 9,
                                         15, 16, 17, 31, 64, 67};

template <class T>
void check_elementwise_exact(const kernels::Ops<T>& a,
                             const kernels::Ops<T>& b) {
  Rng rng(11);
  for (std::size_t n : kSizes) {
    auto x = testutil::uniform_vec<T>(n, rng);
    auto y0 = testutil::uniform_vec<T>(n, rng);
    T s = static_cast<T>(rng.uniform(-2, 2));

    auto ya = y0, yb = y0;
    a.axpy(n, s, x.data(), ya.data());
    b.axpy(n, s, x.data(), yb.data());
    CHECK(ya == yb);

    ya = y0;
    yb = y0;
    a.add(n, x.data(), ya.data());
    b.add(n, x.data(), yb.data());
    CHECK(ya == yb);

    ya = y0;
    yb = y0;
    a.mul(n, x.data(), ya.data());
    b.mul(n, x.data(), yb.data());
    CHECK(ya == yb);

    ya = y0;
    yb = y0;
    a.scale(n, s, ya.data());
    b.scale(n, s, yb.data());
    CHECK(ya == yb);
  }
}

template <class T>
void check_reductions_close(const kernels::Ops<T>& a, const kernels::Ops<T>& b,
                            double tol) {
  Rng rng(12);
  for (std::size_t n : kSizes) {
    auto x = testutil::uniform_vec<T>(n, rng);
    auto y = testutil::uniform_vec<T>(n, rng);
    double da = a.dot(n, x.data(), y.data());
    double db = b.dot(n, x.data(), y.data());
    CHECK(std::abs(da - db) <= tol * (1.0 + std::abs(da)));
  }
  // gemv against the reference on a ragged set of shapes
  for (std::size_t rows : {1u, 3u, 8u, 13u}) {
    for (std::size_t cols : {1u, 5u, 16u, 33u}) {
      auto w = testutil::uniform_vec<T>(rows * cols, rng);
      auto x = testutil::uniform_vec<T>(cols, rng);
      auto xt = testutil::uniform_vec<T>(rows, rng);
      std::vector<T> ya(rows, T(1)), yb(rows, T(1));
      a.gemv_acc(rows, cols, w.data(), x.data(), ya.data());
      b.gemv_acc(rows, cols, w.data(), x.data(), yb.data());
      for (std::size_t r = 0; r < rows; ++r) {
        CHECK(std::abs(double(ya[r]) - double(yb[r])) <=
              tol * (1.0 + std::abs(double(ya[r]))));
      }
      std::vector<T> ta(cols, T(0)), tb(cols, T(0));
      a.gemv_t_acc(rows, cols, w.data(), xt.data(), ta.data());
      b.gemv_t_acc(rows, cols, w.data(), xt.data(), tb.data());
      CHECK(ta == tb);  // row-wise axpy: exact
      auto wa = w, wb = w;
      a.ger_acc(rows, cols, wa.data(), xt.data(), x.data());
      b.ger_acc(rows, cols, wb.data(), xt.data(), x.data());
      CHECK(wa == wb);  // row-wise axpy: exact
    }
  }
}

}  // namespace

TEST_CASE("scalar kernels match a straight-line reference") {
  const auto& ops = kernels::scalar_f64();
  std::vector<double> x = {1, 2, 3}, y = {10, 20, 30};
  ops.axpy(3, 2.0, x.data(), y.data());
  CHECK(y == std::vector<double>{12, 24, 36});
  CHECK(ops.dot(3, x.data(), x.data()) == 14.0);
}

TEST_CASE("avx2 kernels agree with scalar reference") {
  if (!kernels::supported(kernels::Backend::avx2)) {
    MESSAGE("avx2 not supported on this CPU; skipping");
    return;
  }
  const auto* avx_f32 = &kernels::f32();
  const auto* avx_f64 = &kernels::f64();
  auto prev = kernels::active();
  kernels::force(kernels::Backend::avx2);
  avx_f32 = &kernels::f32();
  avx_f64 = &kernels::f64();

  SUBCASE("float") {
    check_elementwise_exact(kernels::scalar_f32(), *avx_f32);
    check_reductions_close(kernels::scalar_f32(), *avx_f32, 1e-6);
  }
  SUBCASE("double") {
    check_elementwise_exact(kernels::scalar_f64(), *avx_f64);
    check_reductions_close(kernels::scalar_f64(), *avx_f64, 1e-13);
  }
  kernels::force(prev);
}

TEST_CASE("backend forcing round-trips") {
  auto prev = kernels::active();
  kernels::force(kernels::Backend::scalar);
  CHECK(kernels::active() == kernels::Backend::scalar);
  CHECK(std::string(kernels::name()) == "scalar");
  kernels::force(prev);
  CHECK(kernels::active() == prev);
}
