#include <cmath>
#include <vector>

#include "csem/errors.hpp"
#include "csem/gradcheck.hpp"
#include "csem/nn.hpp"
#include "doctest.h"
#include "testutil.hpp"

using namespace csem;

namespace {

double weighted(const DTensor& v, const std::vector<double>& w) {
  double s = 0;
  for (std::size_t i = 0; i < v.size(); ++i) s += w[i] * v[i];
  return s;
}

}  // namespace

TEST_CASE("lstm cell zero-parameter cases") {
  Rng rng(1);
  auto p = make_lstm<float>(3, 4, rng);
  p.w_ih.zero();
  p.w_hh.zero();
  p.b.zero();
  Tensor x({3}), h0({4}), c0({4});
  x.fill(0.7f);

  SUBCASE("zero c_prev gives zero h and c") {
    auto [h, c] = lstm_cell(p, x, h0, c0);
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(h[j] == 0.0f);
      CHECK(c[j] == 0.0f);
    }
  }
  SUBCASE("c = 0.5 c_prev when gates sit at sigmoid(0)") {
    c0.fill(1.0f);
    auto [h, c] = lstm_cell(p, x, h0, c0);
    for (std::size_t j = 0; j < 4; ++j) CHECK(c[j] == doctest::Approx(0.5f));
  }
}

TEST_CASE("gru cell zero-parameter cases") {
  Rng rng(2);
  auto p = make_gru<float>(3, 4, rng);
  p.w_ih.zero();
  p.w_hh.zero();
  Tensor x({3}), h0({4});
  x.fill(-0.3f);

  Tensor h = gru_cell(p, x, h0);
  for (std::size_t j = 0; j < 4; ++j) CHECK(h[j] == 0.0f);

  h0 = Tensor::from({4}, {1.0f, -2.0f, 0.5f, 3.0f});
  h = gru_cell(p, x, h0);
  for (std::size_t j = 0; j < 4; ++j) {
    CHECK(h[j] == doctest::Approx(0.5f * h0[j]));
  }
}

TEST_CASE("cell shape mismatches throw") {
  Rng rng(3);
  auto p = make_lstm<float>(3, 4, rng);
  Tensor bad({2}), h0({4}), c0({4});
  CHECK_THROWS_AS(lstm_cell(p, bad, h0, c0), ShapeError);
  auto g = make_gru<float>(3, 4, rng);
  CHECK_THROWS_AS(gru_cell(g, bad, h0), ShapeError);
}

TEST_CASE("softmax cross entropy examples") {
  SUBCASE("uniform logits") {
    std::vector<float> logits(4, 1.7f);
    float loss = softmax_xent<float>(logits, 2);
    CHECK(loss == doctest::Approx(std::log(4.0f)).epsilon(1e-6));
  }
  SUBCASE("two-way gradient") {
    std::vector<float> logits = {0.0f, 0.0f}, d(2);
    softmax_xent<float>(logits, 0, d);
    CHECK(d[0] == doctest::Approx(-0.5f));
    CHECK(d[1] == doctest::Approx(0.5f));
  }
  SUBCASE("large logits do not overflow") {
    std::vector<float> logits = {1000.0f, 0.0f};
    float loss = softmax_xent<float>(logits, 0);
    CHECK(loss == doctest::Approx(0.0f).epsilon(1e-6));
    CHECK(std::isfinite(loss));
  }
  SUBCASE("probabilities sum to one and loss is non-negative") {
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
      auto logits = testutil::uniform_vec<float>(9, rng, -5, 5);
      std::vector<float> d(9);
      float loss = softmax_xent<float>(logits, trial % 9, d);
      CHECK(loss >= 0.0f);
      double sum = 1.0;  // adding back the onehot
      for (float g : d) sum += g;
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
  SUBCASE("target out of range") {
    std::vector<float> logits = {0.0f, 0.0f};
    CHECK_THROWS_AS(softmax_xent<float>(logits, 2), DataError);
    CHECK_THROWS_AS(softmax_xent<float>(logits, -1), DataError);
  }
}

TEST_CASE("argmax ties break to the lowest id") {
  std::vector<float> v = {1.0f, 1.0f, 1.0f};
  CHECK(argmax_lowest<float>(v) == 0);
  v = {0.0f, 2.0f, 2.0f};
  CHECK(argmax_lowest<float>(v) == 1);
}

TEST_CASE("sgd step") {
  SUBCASE("zero gradients leave parameters unchanged") {
    Tensor p = Tensor::from({3}, {1.0f, 2.0f, 3.0f});
    Tensor g({3});
    ParamRefs refs;
    refs.add(p, g);
    sgd_step(refs, 0.5, 0.0);
    CHECK(p == Tensor::from({3}, {1.0f, 2.0f, 3.0f}));
  }
  SUBCASE("plain update") {
    Tensor p = Tensor::from({1}, {1.0f});
    Tensor g = Tensor::from({1}, {0.5f});
    ParamRefs refs;
    refs.add(p, g);
    sgd_step(refs, 0.1, 0.0);
    CHECK(p[0] == doctest::Approx(0.95f));
    CHECK(g[0] == 0.0f);  // tape zeroed
  }
  SUBCASE("global norm clipping halves an overlong gradient") {
    Tensor p({2});
    Tensor g = Tensor::from({2}, {6.0f, 8.0f});  // norm 10
    ParamRefs refs;
    refs.add(p, g);
    double norm = sgd_step(refs, 1.0, 5.0);
    CHECK(norm == doctest::Approx(10.0));
    CHECK(p[0] == doctest::Approx(-3.0f));  // update used g/2
    CHECK(p[1] == doctest::Approx(-4.0f));
  }
  SUBCASE("non-finite gradient reported") {
    Tensor p({1});
    Tensor g = Tensor::from({1}, {std::numeric_limits<float>::infinity()});
    ParamRefs refs;
    refs.add(p, g);
    CHECK_THROWS_AS(sgd_step(refs, 0.1, 0.0), TrainError);
  }
}

TEST_CASE("linear layer gradient check") {
  for (std::uint64_t seed : {10u, 11u, 12u}) {
    Rng rng(seed);
    auto p = make_linear<double>(5, 4, rng);
    testutil::fill_uniform(p.b, rng);
    DTensor x({5});
    testutil::fill_uniform(x, rng);
    auto w = testutil::uniform_vec<double>(4, rng);

    auto loss = [&]() {
      DTensor y({4});
      linear_forward(p, x.data(), y.data());
      return weighted(y, w);
    };

    auto grads = zeros_like(p);
    DTensor dx({5});
    linear_backward(p, x.data(), w.data(), grads, dx.data());

    auto report = grad_check({&p.w, &p.b, &x}, {&grads.w, &grads.b, &dx}, loss);
    CHECK(report.max_rel_err < 1e-7);
  }
}

TEST_CASE("lstm cell gradient check") {
  for (std::uint64_t seed : {20u, 21u, 22u}) {
    Rng rng(seed);
    auto p = make_lstm<double>(5, 7, rng);
    testutil::fill_uniform(p.b, rng, -0.5, 0.5);
    DTensor x({5}), h0({7}), c0({7});
    testutil::fill_uniform(x, rng);
    testutil::fill_uniform(h0, rng);
    testutil::fill_uniform(c0, rng);
    auto wh = testutil::uniform_vec<double>(7, rng);
    auto wc = testutil::uniform_vec<double>(7, rng);

    auto loss = [&]() {
      auto [h, c] = lstm_cell(p, x, h0, c0);
      return weighted(h, wh) + weighted(c, wc);
    };

    LstmCacheT<double> cache;
    DTensor h({7}), c({7});
    lstm_cell(p, x.data(), h0.data(), c0.data(), h.data(), c.data(), &cache);
    auto grads = zeros_like(p);
    DTensor dx({5}), dh0({7}), dc0({7});
    lstm_cell_backward(p, cache, wh.data(), wc.data(), grads, dx.data(),
                       dh0.data(), dc0.data());

    auto report = grad_check({&p.w_ih, &p.w_hh, &p.b, &x, &h0, &c0},
                             {&grads.w_ih, &grads.w_hh, &grads.b, &dx, &dh0,
                              &dc0},
                             loss);
    CHECK(report.max_rel_err < 1e-4);
    CHECK(report.max_rel_err < 1e-7);  // in double it should be far tighter
  }
}

TEST_CASE("lstm backward with zero upstream gradient is zero") {
  Rng rng(30);
  auto p = make_lstm<double>(3, 4, rng);
  DTensor x({3}), h0({4}), c0({4});
  testutil::fill_uniform(x, rng);
  testutil::fill_uniform(h0, rng);
  testutil::fill_uniform(c0, rng);
  LstmCacheT<double> cache;
  DTensor h({4}), c({4});
  lstm_cell(p, x.data(), h0.data(), c0.data(), h.data(), c.data(), &cache);
  auto grads = zeros_like(p);
  DTensor dx({3}), dh0({4}), dc0({4});
  std::vector<double> zero(4, 0.0);
  lstm_cell_backward(p, cache, zero.data(), zero.data(), grads, dx.data(),
                     dh0.data(), dc0.data());
  for (std::size_t i = 0; i < grads.w_ih.size(); ++i) {
    CHECK(grads.w_ih[i] == 0.0);
  }
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(dh0[i] == 0.0);
    CHECK(dc0[i] == 0.0);
  }
}

// Scalar LSTM where every gradient is hand-derivable: all widths are 1, so
// the chain rule can be written out term by term with plain arithmetic.
TEST_CASE("single-scalar lstm matches hand-derived gradients") {
  Rng rng(31);
  auto p = make_lstm<double>(1, 1, rng);
  testutil::fill_uniform(p.b, rng, -0.5, 0.5);
  double x = 0.37, h0 = -0.21, c0 = 0.64;

  double wi_i = p.w_ih[0], wi_f = p.w_ih[1], wi_g = p.w_ih[2], wi_o = p.w_ih[3];
  double wh_i = p.w_hh[0], wh_f = p.w_hh[1], wh_g = p.w_hh[2], wh_o = p.w_hh[3];
  double b_i = p.b[0], b_f = p.b[1], b_g = p.b[2], b_o = p.b[3];

  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  double gi = sig(wi_i * x + wh_i * h0 + b_i);
  double gf = sig(wi_f * x + wh_f * h0 + b_f);
  double gg = std::tanh(wi_g * x + wh_g * h0 + b_g);
  double go = sig(wi_o * x + wh_o * h0 + b_o);
  double c = gf * c0 + gi * gg;
  double th = std::tanh(c);

  // Loss = h. Hand chain rule:
  double dct = go * (1.0 - th * th);
  double dpre_o = th * go * (1.0 - go);
  double dpre_i = dct * gg * gi * (1.0 - gi);
  double dpre_f = dct * c0 * gf * (1.0 - gf);
  double dpre_g = dct * gi * (1.0 - gg * gg);

  LstmCacheT<double> cache;
  DTensor h_out({1}), c_out({1});
  lstm_cell(p, &x, &h0, &c0, h_out.data(), c_out.data(), &cache);
  CHECK(h_out[0] == doctest::Approx(go * th).epsilon(1e-12));

  auto grads = zeros_like(p);
  double dh = 1.0, dc = 0.0, dx = 0, dh_prev = 0, dc_prev = 0;
  lstm_cell_backward(p, cache, &dh, &dc, grads, &dx, &dh_prev, &dc_prev);

  CHECK(grads.w_ih[0] == doctest::Approx(dpre_i * x).epsilon(1e-10));
  CHECK(grads.w_ih[1] == doctest::Approx(dpre_f * x).epsilon(1e-10));
  CHECK(grads.w_ih[2] == doctest::Approx(dpre_g * x).epsilon(1e-10));
  CHECK(grads.w_ih[3] == doctest::Approx(dpre_o * x).epsilon(1e-10));
  CHECK(grads.w_hh[0] == doctest::Approx(dpre_i * h0).epsilon(1e-10));
  CHECK(grads.b[2] == doctest::Approx(dpre_g).epsilon(1e-10));
  CHECK(dx == doctest::Approx(dpre_i * wi_i + dpre_f * wi_f + dpre_g * wi_g +
                              dpre_o * wi_o)
                  .epsilon(1e-10));
  CHECK(dh_prev == doctest::Approx(dpre_i * wh_i + dpre_f * wh_f +
                                   dpre_g * wh_g + dpre_o * wh_o)
                       .epsilon(1e-10));
  CHECK(dc_prev == doctest::Approx(dct * gf).epsilon(1e-10));
}

TEST_CASE("gru cell gradient check") {
  for (std::uint64_t seed : {40u, 41u, 42u}) {
    Rng rng(seed);
    auto p = make_gru<double>(5, 6, rng);
    testutil::fill_uniform(p.b_ih, rng, -0.5, 0.5);
    testutil::fill_uniform(p.b_hh, rng, -0.5, 0.5);
    DTensor x({5}), h0({6});
    testutil::fill_uniform(x, rng);
    testutil::fill_uniform(h0, rng);
    auto w = testutil::uniform_vec<double>(6, rng);

    auto loss = [&]() { return weighted(gru_cell(p, x, h0), w); };

    GruCacheT<double> cache;
    DTensor h({6});
    gru_cell(p, x.data(), h0.data(), h.data(), &cache);
    auto grads = zeros_like(p);
    DTensor dx({5}), dh0({6});
    gru_cell_backward(p, cache, w.data(), grads, dx.data(), dh0.data());

    auto report =
        grad_check({&p.w_ih, &p.w_hh, &p.b_ih, &p.b_hh, &x, &h0},
                   {&grads.w_ih, &grads.w_hh, &grads.b_ih, &grads.b_hh, &dx,
                    &dh0},
                   loss);
    CHECK(report.max_rel_err < 1e-4);
    CHECK(report.max_rel_err < 1e-7);
  }
}

TEST_CASE("softmax gradient check") {
  Rng rng(50);
  DTensor logits({8});
  testutil::fill_uniform(logits, rng, -2, 2);
  int target = 3;

  auto loss = [&]() {
    return softmax_xent<double>(
        std::span<const double>(logits.data(), logits.size()), target);
  };
  DTensor d({8});
  softmax_xent<double>(std::span<const double>(logits.data(), logits.size()),
                       target, std::span<double>(d.data(), d.size()));
  auto report = grad_check({&logits}, {&d}, loss);
  CHECK(report.max_rel_err < 1e-7);
}

TEST_CASE("cells are deterministic") {
  Rng rng(60);
  auto p = make_lstm<float>(4, 5, rng);
  Tensor x({4}), h0({5}), c0({5});
  testutil::fill_uniform(x, rng);
  auto a = lstm_cell(p, x, h0, c0);
  auto b = lstm_cell(p, x, h0, c0);
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}
