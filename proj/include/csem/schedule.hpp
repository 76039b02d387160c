#pragma once

#include <limits>
#include <vector>

namespace csem {

// Patience-based learning-rate annealing over a lower-is-better metric.
// An update counts as an improvement when it beats the best seen value by
// more than `threshold`; after `patience` consecutive non-improvements the
// rate is multiplied by `decay` and the counter resets.
struct LrSchedule {
  double lr = 0;
  double decay = 0.25;
  int patience = 25;
  double threshold = 1e-4;

  double best = std::numeric_limits<double>::infinity();
  int bad = 0;

  // Returns true when this update annealed the rate.
  bool update(double metric) {
    if (metric < best - threshold) {
      best = metric;
      bad = 0;
      return false;
    }
    if (++bad >= patience) {
      lr *= decay;
      bad = 0;
      return true;
    }
    return false;
  }
};

// Per-epoch record for the downstream heads (dev_metric is micro-F1 for the
// tagger, accuracy for the classifier).
struct HeadCheckpoint {
  int epoch = 0;
  double train_loss = 0;
  double dev_metric = 0;
  double lr = 0;
};
using HeadTrainLog = std::vector<HeadCheckpoint>;

}  // namespace csem
