#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "csem/tensor.hpp"

namespace csem {

struct GradCheckReport {
  double max_rel_err = 0;
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
  double analytic = 0;
  double numeric = 0;
};

// Central-difference check of precomputed analytic gradients: for every
// coordinate of every listed tensor, perturb by +/- eps, re-evaluate `loss`,
// and compare (f(t+eps) - f(t-eps)) / 2 eps against the analytic value.
// The error metric is |a - n| / max(1, |a|, |n|): relative for large
// gradients, absolute below magnitude 1, so near-zero gradients do not blow
// up the ratio. Double precision only.
inline GradCheckReport grad_check(const std::vector<DTensor*>& params,
                                  const std::vector<const DTensor*>& grads,
                                  const std::function<double()>& loss,
                                  double eps = 1e-5) {
  GradCheckReport report;
  for (std::size_t t = 0; t < params.size(); ++t) {
    DTensor& p = *params[t];
    const DTensor& g = *grads[t];
    for (std::size_t i = 0; i < p.size(); ++i) {
      double saved = p[i];
      p[i] = saved + eps;
      double up = loss();
      p[i] = saved - eps;
      double down = loss();
      p[i] = saved;
      double numeric = (up - down) / (2 * eps);
      double analytic = g[i];
      double rel = std::abs(analytic - numeric) /
                   std::max({1.0, std::abs(analytic), std::abs(numeric)});
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_tensor = t;
        report.worst_index = i;
        report.analytic = analytic;
        report.numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace csem
