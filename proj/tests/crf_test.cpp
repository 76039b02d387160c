#include <cmath>
#include <vector>

#include "csem/crf.hpp"
#include "csem/errors.hpp"
#include "csem/gradcheck.hpp"
#include "csem/nn.hpp"
#include "doctest.h"
#include "testutil.hpp"

using namespace csem;

namespace {

// Exhaustive oracles: walk all K^n paths in lexicographic order.
template <class T>
std::vector<std::vector<int>> all_paths(std::size_t n, std::size_t k) {
  std::vector<std::vector<int>> out;
  std::vector<int> path(n, 0);
  while (true) {
    out.push_back(path);
    std::size_t pos = n;
    while (pos-- > 0) {
      if (++path[pos] < static_cast<int>(k)) break;
      path[pos] = 0;
      if (pos == 0) return out;
    }
  }
}

double brute_log_z(const DTensor& emissions, const DTensor& transitions) {
  std::size_t n = emissions.dim(0), k = emissions.dim(1);
  double m = -std::numeric_limits<double>::infinity();
  std::vector<double> scores;
  for (const auto& path : all_paths<double>(n, k)) {
    double s = crf_path_score(emissions, transitions, path);
    scores.push_back(s);
    m = std::max(m, s);
  }
  double acc = 0;
  for (double s : scores) acc += std::exp(s - m);
  return m + std::log(acc);
}

std::pair<std::vector<int>, double> brute_best(const DTensor& emissions,
                                               const DTensor& transitions) {
  std::size_t n = emissions.dim(0), k = emissions.dim(1);
  std::vector<int> best;
  double best_score = -std::numeric_limits<double>::infinity();
  for (const auto& path : all_paths<double>(n, k)) {
    double s = crf_path_score(emissions, transitions, path);
    if (s > best_score) {
      best_score = s;
      best = path;
    }
  }
  return {best, best_score};
}

DTensor random_transitions(std::size_t k, Rng& rng) {
  DTensor t({k + 2, k + 2});
  testutil::fill_uniform(t, rng, -1.5, 1.5);
  for (std::size_t i = 0; i < k + 2; ++i) {
    t.at(i, k) = kCrfMask;
    t.at(k + 1, i) = kCrfMask;
  }
  return t;
}

}  // namespace

TEST_CASE("length-1 chain with zero transitions reduces to softmax") {
  Rng rng(1);
  std::size_t k = 5;
  DTensor emissions({1, k});
  testutil::fill_uniform(emissions, rng, -2, 2);
  DTensor transitions({k + 2, k + 2});  // all zero, including START/STOP rows
  int gold = 3;
  std::vector<int> gold_path = {gold};
  double loss = crf_nll(emissions, transitions, gold_path);
  double want = softmax_xent<double>(
      std::span<const double>(emissions.data(), k), gold);
  CHECK(loss == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("forward algorithm matches exhaustive enumeration") {
  Rng rng(2);
  for (int trial = 0; trial < 40; ++trial) {
    std::size_t n = 1 + trial % 5, k = 2 + trial % 3;
    DTensor emissions({n, k});
    testutil::fill_uniform(emissions, rng, -2, 2);
    DTensor transitions = random_transitions(k, rng);
    std::vector<int> gold(n);
    for (auto& g : gold) g = static_cast<int>(rng.below(k));

    double log_z_forward =
        crf_nll(emissions, transitions, gold) +
        crf_path_score(emissions, transitions, gold);
    CHECK(log_z_forward ==
          doctest::Approx(brute_log_z(emissions, transitions)).epsilon(1e-8));
  }
}

TEST_CASE("gold posterior matches brute force") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    std::size_t n = 3, k = 3;
    DTensor emissions({n, k});
    testutil::fill_uniform(emissions, rng, -1, 1);
    DTensor transitions = random_transitions(k, rng);
    std::vector<int> gold = {0, 2, 1};
    double nll = crf_nll(emissions, transitions, gold);
    double want = std::exp(crf_path_score(emissions, transitions, gold) -
                           brute_log_z(emissions, transitions));
    CHECK(std::exp(-nll) == doctest::Approx(want).epsilon(1e-8));
  }
}

TEST_CASE("viterbi matches exhaustive argmax") {
  Rng rng(4);
  for (int trial = 0; trial < 40; ++trial) {
    std::size_t n = 1 + trial % 4, k = 2 + trial % 3;
    DTensor emissions({n, k});
    testutil::fill_uniform(emissions, rng, -2, 2);
    DTensor transitions = random_transitions(k, rng);
    auto [path, score] = viterbi(emissions, transitions);
    auto [want_path, want_score] = brute_best(emissions, transitions);
    CHECK(path == want_path);
    CHECK(score == doctest::Approx(want_score).epsilon(1e-9));
    // Viterbi's score is the path's score under the shared scorer.
    CHECK(score ==
          doctest::Approx(crf_path_score(emissions, transitions, path))
              .epsilon(1e-9));
  }
}

TEST_CASE("viterbi tie break gives the all-zeros path") {
  DTensor emissions({4, 3});
  emissions.fill(0.25);
  DTensor transitions({5, 5});
  transitions.fill(-0.5);
  auto [path, score] = viterbi(emissions, transitions);
  CHECK(path == std::vector<int>{0, 0, 0, 0});
  (void)score;
}

TEST_CASE("length-1 viterbi is the emission argmax") {
  DTensor emissions = DTensor::from({1, 3}, {0.1, 3.0, -1.0});
  DTensor transitions({5, 5});
  auto [path, score] = viterbi(emissions, transitions);
  CHECK(path == std::vector<int>{1});
  CHECK(score == doctest::Approx(3.0));
}

TEST_CASE("gold equal to the only viable path drives loss to zero") {
  std::size_t n = 3, k = 2;
  DTensor emissions({n, k});
  emissions.fill(kCrfMask);
  std::vector<int> gold = {1, 0, 1};
  for (std::size_t t = 0; t < n; ++t) {
    emissions.at(t, static_cast<std::size_t>(gold[t])) = 0.0;
  }
  DTensor transitions({k + 2, k + 2});
  double loss = crf_nll(emissions, transitions, gold);
  CHECK(loss == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("shifting one position's emissions keeps the viterbi path") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    std::size_t n = 4, k = 3;
    DTensor emissions({n, k});
    testutil::fill_uniform(emissions, rng, -2, 2);
    DTensor transitions = random_transitions(k, rng);
    auto before = viterbi(emissions, transitions).first;
    for (std::size_t j = 0; j < k; ++j) emissions.at(2, j) += 7.5;
    auto after = viterbi(emissions, transitions).first;
    CHECK(before == after);
  }
}

TEST_CASE("crf gradient check over emissions and transitions") {
  for (std::uint64_t seed : {70u, 71u, 72u}) {
    Rng rng(seed);
    std::size_t n = 4, k = 3;
    DTensor emissions({n, k});
    testutil::fill_uniform(emissions, rng, -1, 1);
    DTensor transitions = random_transitions(k, rng);
    std::vector<int> gold(n);
    for (auto& g : gold) g = static_cast<int>(rng.below(k));

    auto loss = [&]() { return crf_nll(emissions, transitions, gold); };

    DTensor de({n, k}), dt({k + 2, k + 2});
    crf_nll(emissions, transitions, gold, &de, &dt);
    auto report = grad_check({&emissions, &transitions}, {&de, &dt}, loss);
    CHECK(report.max_rel_err < 1e-4);
    CHECK(report.max_rel_err < 1e-7);
  }
}

TEST_CASE("crf input validation") {
  DTensor transitions({5, 5});
  DTensor emissions({2, 3});
  std::vector<int> gold = {0, 1};
  SUBCASE("empty sequence") {
    CHECK_THROWS_AS(viterbi(DTensor({1, 3}), DTensor({4, 4})), ShapeError);
  }
  SUBCASE("gold out of range") {
    std::vector<int> bad = {0, 3};
    CHECK_THROWS_AS(crf_nll(emissions, transitions, bad), DataError);
  }
  SUBCASE("gold length mismatch") {
    std::vector<int> bad = {0};
    CHECK_THROWS_AS(crf_nll(emissions, transitions, bad), ShapeError);
  }
}
