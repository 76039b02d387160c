#pragma once

#include <span>
#include <utility>
#include <vector>

#include "csem/rng.hpp"
#include "csem/tensor.hpp"

namespace csem {

// Linear-chain CRF over K tags plus two virtual tags, START = K and
// STOP = K + 1, which live only in the transition matrix. transitions is
// [(K+2) x (K+2)] with t[i][j] = score of moving from tag i to tag j; the
// column into START and the row out of STOP are pinned to kCrfMask.
inline constexpr double kCrfMask = -1e9;

template <class T>
std::size_t crf_num_tags(const TensorT<T>& transitions);

// Freshly initialized transitions: trainable cells uniform in
// [-1/sqrt(K+2), +1/sqrt(K+2)], masked cells at kCrfMask.
template <class T>
TensorT<T> make_transitions(std::size_t num_tags, Rng& rng);

// Score of one complete path, including START -> y[0] and y[n-1] -> STOP.
template <class T>
T crf_path_score(const TensorT<T>& emissions, const TensorT<T>& transitions,
                 std::span<const int> path);

// Negative log likelihood of the gold path: logZ - score(gold), with logZ
// from the forward algorithm in log space. Gradients (from the
// forward-backward marginals) are scaled by `scale` and accumulated into
// d_emissions / d_transitions when non-null.
template <class T>
T crf_nll(const TensorT<T>& emissions, const TensorT<T>& transitions,
          std::span<const int> gold, TensorT<T>* d_emissions = nullptr,
          TensorT<T>* d_transitions = nullptr, T scale = T(1));

// Best-scoring path under the same scoring as crf_nll. Ties break toward the
// lower tag id at each backtrack step.
template <class T>
std::pair<std::vector<int>, T> viterbi(const TensorT<T>& emissions,
                                       const TensorT<T>& transitions);

}  // namespace csem
