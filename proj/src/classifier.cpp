#include "csem/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "csem/errors.hpp"

namespace csem {
namespace {

struct ClsGrads {
  GruParams gru;
  LinearParams out;
};

// One training example: cross-entropy loss scaled by `scale`, gradients
// accumulated through the output layer and back through time.
double train_one(const GruClassifier& m, ClsGrads& grads,
                 const std::vector<Tensor>& word_vecs, int gold, float scale) {
  const std::size_t n = word_vecs.size();
  const std::size_t hid = static_cast<std::size_t>(m.config.hidden);
  const std::size_t classes = m.labels.size();

  std::vector<GruCache> caches(n);
  std::vector<float> h(hid, 0.0f);
  for (std::size_t i = 0; i < n; ++i) {
    gru_cell(m.gru, word_vecs[i].data(), h.data(), h.data(), &caches[i]);
  }

  std::vector<float> logits(classes), dlogits(classes);
  linear_forward(m.out, h.data(), logits.data());
  double loss = softmax_xent<float>(
      std::span<const float>(logits.data(), classes), gold,
      std::span<float>(dlogits.data(), classes));
  kernels::f32().scale(classes, scale, dlogits.data());

  std::vector<float> dh(hid), dh_prev(hid), dx(m.embed_dim);
  linear_backward(m.out, h.data(), dlogits.data(), grads.out, dh.data());
  for (std::size_t i = n; i-- > 0;) {
    gru_cell_backward(m.gru, caches[i], dh.data(), grads.gru, dx.data(),
                      dh_prev.data());
    dh.swap(dh_prev);
  }
  return loss * scale;
}

}  // namespace

LabelSet LabelSet::from_data(const std::vector<LabeledText>& data) {
  LabelSet set;
  for (const auto& r : data) {
    if (set.ids_.emplace(r.label, static_cast<int>(set.labels.size()))
            .second) {
      set.labels.push_back(r.label);
    }
  }
  return set;
}

LabelSet LabelSet::from_labels(std::vector<std::string> labels) {
  LabelSet set;
  set.labels = std::move(labels);
  for (std::size_t i = 0; i < set.labels.size(); ++i) {
    if (!set.ids_.emplace(set.labels[i], static_cast<int>(i)).second) {
      throw DataError("duplicate label '" + set.labels[i] + "'");
    }
  }
  return set;
}

int LabelSet::id(const std::string& label) const {
  auto it = ids_.find(label);
  return it == ids_.end() ? -1 : it->second;
}

void ClassifierConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("classifier config: ") + what);
  };
  require(hidden > 0, "hidden must be positive");
  require(lr0 > 0, "lr0 must be positive");
  require(epochs > 0, "epochs must be positive");
  require(batch > 0, "batch must be positive");
  require(anneal_factor > 0 && anneal_factor < 1,
          "anneal_factor must be in (0, 1)");
  require(patience > 0, "patience must be positive");
  require(clip >= 0, "clip must be non-negative");
}

GruClassifier::GruClassifier(ClassifierConfig cfg, LabelSet label_set,
                             std::shared_ptr<const Embedder> emb,
                             std::uint64_t seed)
    : config(cfg), labels(std::move(label_set)), embedder(std::move(emb)) {
  config.validate();
  if (!embedder) throw ConfigError("classifier needs an embedder");
  if (labels.size() < 2) {
    throw DataError("classifier needs at least 2 classes, got " +
                    std::to_string(labels.size()));
  }
  embed_dim = embedder->dim();
  Rng rng(seed);
  gru = make_gru<float>(embed_dim, static_cast<std::size_t>(config.hidden),
                        rng);
  out = make_linear<float>(static_cast<std::size_t>(config.hidden),
                           labels.size(), rng);
}

void GruClassifier::set_embedder(std::shared_ptr<const Embedder> emb) {
  if (!emb) throw ConfigError("classifier needs an embedder");
  if (emb->dim() != embed_dim) {
    throw DataError("classifier expects embeddings of dim " +
                    std::to_string(embed_dim) + " but " + emb->describe() +
                    " produces dim " + std::to_string(emb->dim()));
  }
  embedder = std::move(emb);
}

Tensor GruClassifier::logits(const Sentence& s) const {
  if (s.tokens.empty()) throw DataError("classifier: empty sentence");
  auto vecs = embedder->embed(s);
  std::vector<float> h(static_cast<std::size_t>(config.hidden), 0.0f);
  for (const auto& x : vecs) {
    gru_cell(gru, x.data(), h.data(), h.data());
  }
  Tensor result({labels.size()});
  linear_forward(out, h.data(), result.data());
  return result;
}

std::string GruClassifier::predict(const Sentence& s) const {
  Tensor scores = logits(s);
  return labels.label(argmax_lowest<float>(
      std::span<const float>(scores.data(), scores.size())));
}

GruClassifier train_classifier(const ClassifierConfig& config,
                               std::shared_ptr<const Embedder> embedder,
                               const std::vector<LabeledText>& train,
                               const std::vector<LabeledText>& dev,
                               std::uint64_t seed, HeadTrainLog* log) {
  config.validate();
  if (train.empty()) throw DataError("classifier: empty training set");
  if (dev.empty()) throw DataError("classifier: empty dev set");

  GruClassifier model(config, LabelSet::from_data(train), std::move(embedder),
                      seed);
  auto gold_id = [&](const LabeledText& r) {
    int id = model.labels.id(r.label);
    if (id < 0) {
      throw DataError("unknown label '" + r.label + "' for text '" +
                      r.text.joined() + "'");
    }
    return id;
  };
  std::vector<int> gold;
  gold.reserve(train.size());
  for (const auto& r : train) gold.push_back(gold_id(r));
  for (const auto& r : dev) gold_id(r);

  ClsGrads grads{zeros_like(model.gru), zeros_like(model.out)};
  ParamRefs refs;
  refs.add(model.gru, grads.gru);
  refs.add(model.out, grads.out);

  LrSchedule sched;
  sched.lr = config.lr0;
  sched.decay = config.anneal_factor;
  sched.patience = config.patience;

  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  GruClassifier best = model;
  double best_acc = -1;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0;
    long batches = 0;
    for (std::size_t at = 0; at < order.size();
         at += static_cast<std::size_t>(config.batch)) {
      const std::size_t end = std::min(
          order.size(), at + static_cast<std::size_t>(config.batch));
      const float scale = 1.0f / static_cast<float>(end - at);
      double batch_loss = 0;
      for (std::size_t i = at; i < end; ++i) {
        const auto& r = train[order[i]];
        auto vecs = model.embedder->embed(r.text);
        batch_loss += train_one(model, grads, vecs, gold[order[i]], scale);
      }
      if (!std::isfinite(batch_loss)) {
        throw TrainError("non-finite classifier loss in epoch " +
                         std::to_string(epoch) + " (lr " +
                         std::to_string(sched.lr) + ")");
      }
      sgd_step(refs, sched.lr, config.clip);
      epoch_loss += batch_loss;
      ++batches;
    }

    double acc = evaluate_classifier(model, dev).accuracy;
    if (log) {
      log->push_back({epoch, epoch_loss / double(batches), acc, sched.lr});
    }
    if (acc > best_acc) {
      best_acc = acc;
      best = model;
    }
    sched.update(1.0 - acc);
  }
  return best;
}

ClsReport evaluate_classifier(const GruClassifier& model,
                              const std::vector<LabeledText>& test) {
  if (test.empty()) throw DataError("classifier: empty test set");
  const std::size_t classes = model.labels.size();

  ClsReport report;
  report.labels = model.labels.labels;
  report.confusion.assign(classes * classes, 0);
  long correct = 0;
  for (const auto& r : test) {
    int gold = model.labels.id(r.label);
    if (gold < 0) {
      throw DataError("unknown label '" + r.label + "' in test set");
    }
    int pred = model.labels.id(model.predict(r.text));
    ++report.confusion[static_cast<std::size_t>(gold) * classes +
                       static_cast<std::size_t>(pred)];
    if (gold == pred) ++correct;
    ++report.total;
  }
  report.accuracy = double(correct) / double(report.total);
  return report;
}

std::string ClsReport::render() const {
  char buf[160];
  std::string out;
  std::snprintf(buf, sizeof(buf), "accuracy  %.4f\n", accuracy);
  out += buf;
  std::size_t width = 4;
  for (const auto& l : labels) width = std::max(width, l.size());
  out += "confusion (rows = gold)\n";
  for (std::size_t g = 0; g < labels.size(); ++g) {
    std::snprintf(buf, sizeof(buf), "%-*s", static_cast<int>(width + 2),
                  labels[g].c_str());
    out += buf;
    for (std::size_t p = 0; p < labels.size(); ++p) {
      std::snprintf(buf, sizeof(buf), " %6ld", at(g, p));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

}  // namespace csem
