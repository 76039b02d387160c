#include <cmath>

#include "csem/errors.hpp"
#include "csem/tensor.hpp"
#include "doctest.h"
#include "testutil.hpp"

using namespace csem;

namespace {

// Independent oracle: the naive triple loop in double.
DTensor naive_matmul(const Tensor& a, const Tensor& b) {
  DTensor c({a.dim(0), b.dim(1)});
  for (std::size_t i = 0; i < a.dim(0); ++i) {
    for (std::size_t j = 0; j < b.dim(1); ++j) {
      double acc = 0;
      for (std::size_t t = 0; t < a.dim(1); ++t) {
        acc += double(a.at(i, t)) * double(b.at(t, j));
      }
      c.at(i, j) = acc;
    }
  }
  return c;
}

}  // namespace

TEST_CASE("matmul identity") {
  Tensor eye({3, 3});
  for (std::size_t i = 0; i < 3; ++i) eye.at(i, i) = 1.0f;
  Tensor b({3, 4});
  Rng rng(1);
  testutil::fill_uniform(b, rng);
  CHECK(matmul(eye, b) == b);
}

TEST_CASE("matmul 1x1") {
  Tensor a = Tensor::from({1, 1}, {2.0f});
  Tensor b = Tensor::from({1, 1}, {3.0f});
  CHECK(matmul(a, b).at(0, 0) == 6.0f);
}

TEST_CASE("matmul matches the naive triple loop") {
  Rng rng(7);
  Tensor a({5, 4}), b({4, 3});
  testutil::fill_uniform(a, rng);
  testutil::fill_uniform(b, rng);
  Tensor c = matmul(a, b);
  DTensor want = naive_matmul(a, b);
  for (std::size_t i = 0; i < c.size(); ++i) {
    CHECK(std::abs(double(c[i]) - want[i]) <= 1e-6 * (1.0 + std::abs(want[i])));
  }
}

TEST_CASE("matmul rejects mismatched inner dimensions") {
  Tensor a({2, 3}), b({4, 2});
  CHECK_THROWS_AS(matmul(a, b), ShapeError);
}

TEST_CASE("tensor shape checks") {
  CHECK_THROWS_AS(Tensor({0, 2}), ShapeError);
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1.0f}), ShapeError);
  Tensor t({2, 3});
  CHECK(t.size() == 6);
  t.at(1, 2) = 5.0f;
  CHECK(t[5] == 5.0f);
}

TEST_CASE("matmul is deterministic") {
  Rng rng(9);
  Tensor a({7, 6}), b({6, 5});
  testutil::fill_uniform(a, rng);
  testutil::fill_uniform(b, rng);
  CHECK(matmul(a, b) == matmul(a, b));
}
