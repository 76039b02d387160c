#include "csem/crf.hpp"

#include <cmath>
#include <string>

#include "csem/errors.hpp"
#include "csem/rng.hpp"

namespace csem {
namespace {

template <class T>
T log_sum_exp(const T* v, std::size_t n) {
  T m = v[0];
  for (std::size_t i = 1; i < n; ++i) m = std::max(m, v[i]);
  T s = 0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

template <class T>
void check_inputs(const TensorT<T>& emissions, const TensorT<T>& transitions,
                  std::span<const int> gold, bool need_gold) {
  if (emissions.rank() != 2 || emissions.dim(0) == 0) {
    throw DataError("crf: emissions must be [n x K] with n >= 1, got " +
                    shape_string(emissions));
  }
  const std::size_t k = emissions.dim(1);
  if (transitions.rank() != 2 || transitions.dim(0) != k + 2 ||
      transitions.dim(1) != k + 2) {
    throw ShapeError("crf: transitions must be [(K+2) x (K+2)], got " +
                     shape_string(transitions) + " for K = " +
                     std::to_string(k));
  }
  if (need_gold) {
    if (gold.size() != emissions.dim(0)) {
      throw ShapeError("crf: gold length " + std::to_string(gold.size()) +
                       " does not match n = " +
                       std::to_string(emissions.dim(0)));
    }
    for (int y : gold) {
      if (y < 0 || static_cast<std::size_t>(y) >= k) {
        throw DataError("crf: gold tag id " + std::to_string(y) +
                        " out of range for K = " + std::to_string(k));
      }
    }
  }
}

}  // namespace

template <class T>
std::size_t crf_num_tags(const TensorT<T>& transitions) {
  if (transitions.rank() != 2 || transitions.dim(0) != transitions.dim(1) ||
      transitions.dim(0) < 3) {
    throw ShapeError("crf: bad transition matrix " +
                     shape_string(transitions));
  }
  return transitions.dim(0) - 2;
}

template <class T>
TensorT<T> make_transitions(std::size_t num_tags, Rng& rng) {
  const std::size_t k = num_tags, start = k, stop = k + 1;
  TensorT<T> t({k + 2, k + 2});
  double bound = 1.0 / std::sqrt(double(k + 2));
  for (std::size_t i = 0; i < k + 2; ++i) {
    for (std::size_t j = 0; j < k + 2; ++j) {
      t.at(i, j) = static_cast<T>(rng.uniform(-bound, bound));
    }
  }
  for (std::size_t i = 0; i < k + 2; ++i) {
    t.at(i, start) = static_cast<T>(kCrfMask);  // nothing enters START
    t.at(stop, i) = static_cast<T>(kCrfMask);   // nothing leaves STOP
  }
  return t;
}

template <class T>
T crf_path_score(const TensorT<T>& emissions, const TensorT<T>& transitions,
                 std::span<const int> path) {
  check_inputs(emissions, transitions, path, true);
  const std::size_t n = emissions.dim(0), k = emissions.dim(1);
  const std::size_t start = k, stop = k + 1;
  T score = transitions.at(start, static_cast<std::size_t>(path[0]));
  for (std::size_t t = 0; t < n; ++t) {
    score += emissions.at(t, static_cast<std::size_t>(path[t]));
    if (t > 0) {
      score += transitions.at(static_cast<std::size_t>(path[t - 1]),
                              static_cast<std::size_t>(path[t]));
    }
  }
  score += transitions.at(static_cast<std::size_t>(path[n - 1]), stop);
  return score;
}

template <class T>
T crf_nll(const TensorT<T>& emissions, const TensorT<T>& transitions,
          std::span<const int> gold, TensorT<T>* d_emissions,
          TensorT<T>* d_transitions, T scale) {
  check_inputs(emissions, transitions, gold, true);
  const std::size_t n = emissions.dim(0), k = emissions.dim(1);
  const std::size_t start = k, stop = k + 1;

  // Forward pass in log space.
  std::vector<T> alpha(n * k), work(k);
  for (std::size_t j = 0; j < k; ++j) {
    alpha[j] = transitions.at(start, j) + emissions.at(0, j);
  }
  for (std::size_t t = 1; t < n; ++t) {
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t i = 0; i < k; ++i) {
        work[i] = alpha[(t - 1) * k + i] + transitions.at(i, j);
      }
      alpha[t * k + j] = emissions.at(t, j) + log_sum_exp(work.data(), k);
    }
  }
  for (std::size_t j = 0; j < k; ++j) {
    work[j] = alpha[(n - 1) * k + j] + transitions.at(j, stop);
  }
  T log_z = log_sum_exp(work.data(), k);
  T loss = log_z - crf_path_score(emissions, transitions, gold);

  if (d_emissions || d_transitions) {
    // Backward pass, then marginals.
    std::vector<T> beta(n * k);
    for (std::size_t j = 0; j < k; ++j) {
      beta[(n - 1) * k + j] = transitions.at(j, stop);
    }
    for (std::size_t t = n - 1; t-- > 0;) {
      for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
          work[j] = transitions.at(i, j) + emissions.at(t + 1, j) +
                    beta[(t + 1) * k + j];
        }
        beta[t * k + i] = log_sum_exp(work.data(), k);
      }
    }

    if (d_emissions) {
      if (!d_emissions->same_shape(emissions)) {
        throw ShapeError("crf_nll: d_emissions shape mismatch");
      }
      for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t j = 0; j < k; ++j) {
          T marginal = std::exp(alpha[t * k + j] + beta[t * k + j] - log_z);
          T gold_hit = (static_cast<std::size_t>(gold[t]) == j) ? T(1) : T(0);
          d_emissions->at(t, j) += scale * (marginal - gold_hit);
        }
      }
    }
    if (d_transitions) {
      if (!d_transitions->same_shape(transitions)) {
        throw ShapeError("crf_nll: d_transitions shape mismatch");
      }
      for (std::size_t j = 0; j < k; ++j) {
        T marginal = std::exp(alpha[j] + beta[j] - log_z);
        T gold_hit = (static_cast<std::size_t>(gold[0]) == j) ? T(1) : T(0);
        d_transitions->at(start, j) += scale * (marginal - gold_hit);
      }
      for (std::size_t t = 0; t + 1 < n; ++t) {
        for (std::size_t i = 0; i < k; ++i) {
          for (std::size_t j = 0; j < k; ++j) {
            T pair = std::exp(alpha[t * k + i] + transitions.at(i, j) +
                              emissions.at(t + 1, j) + beta[(t + 1) * k + j] -
                              log_z);
            T gold_hit = (static_cast<std::size_t>(gold[t]) == i &&
                          static_cast<std::size_t>(gold[t + 1]) == j)
                             ? T(1)
                             : T(0);
            d_transitions->at(i, j) += scale * (pair - gold_hit);
          }
        }
      }
      for (std::size_t j = 0; j < k; ++j) {
        T marginal =
            std::exp(alpha[(n - 1) * k + j] + beta[(n - 1) * k + j] - log_z);
        T gold_hit =
            (static_cast<std::size_t>(gold[n - 1]) == j) ? T(1) : T(0);
        d_transitions->at(j, stop) += scale * (marginal - gold_hit);
      }
    }
  }
  return loss;
}

template <class T>
std::pair<std::vector<int>, T> viterbi(const TensorT<T>& emissions,
                                       const TensorT<T>& transitions) {
  check_inputs(emissions, transitions, {}, false);
  const std::size_t n = emissions.dim(0), k = emissions.dim(1);
  const std::size_t start = k, stop = k + 1;

  std::vector<T> delta(n * k);
  std::vector<int> back((n > 1 ? n - 1 : 0) * k);
  for (std::size_t j = 0; j < k; ++j) {
    delta[j] = transitions.at(start, j) + emissions.at(0, j);
  }
  for (std::size_t t = 1; t < n; ++t) {
    for (std::size_t j = 0; j < k; ++j) {
      std::size_t best_i = 0;
      T best = delta[(t - 1) * k] + transitions.at(0, j);
      for (std::size_t i = 1; i < k; ++i) {
        T cand = delta[(t - 1) * k + i] + transitions.at(i, j);
        if (cand > best) {  // strict: ties keep the lower tag id
          best = cand;
          best_i = i;
        }
      }
      delta[t * k + j] = emissions.at(t, j) + best;
      back[(t - 1) * k + j] = static_cast<int>(best_i);
    }
  }

  std::size_t best_j = 0;
  T best = delta[(n - 1) * k] + transitions.at(0, stop);
  for (std::size_t j = 1; j < k; ++j) {
    T cand = delta[(n - 1) * k + j] + transitions.at(j, stop);
    if (cand > best) {
      best = cand;
      best_j = j;
    }
  }

  std::vector<int> path(n);
  path[n - 1] = static_cast<int>(best_j);
  for (std::size_t t = n - 1; t-- > 0;) {
    path[t] = back[t * k + static_cast<std::size_t>(path[t + 1])];
  }
  return {std::move(path), best};
}

#define CSEM_INSTANTIATE_CRF(T)                                              \
  template std::size_t crf_num_tags<T>(const TensorT<T>&);                   \
  template TensorT<T> make_transitions<T>(std::size_t, Rng&);                \
  template T crf_path_score<T>(const TensorT<T>&, const TensorT<T>&,         \
                               std::span<const int>);                        \
  template T crf_nll<T>(const TensorT<T>&, const TensorT<T>&,                \
                        std::span<const int>, TensorT<T>*, TensorT<T>*, T);  \
  template std::pair<std::vector<int>, T> viterbi<T>(const TensorT<T>&,      \
                                                     const TensorT<T>&);

CSEM_INSTANTIATE_CRF(float)
CSEM_INSTANTIATE_CRF(double)

#undef CSEM_INSTANTIATE_CRF

}  // namespace csem
