#include "csem/tagger.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "csem/errors.hpp"

namespace csem {
namespace {

struct TaggerGrads {
  LstmParams fwd, bwd;
  LinearParams proj;
  Tensor transitions;
};

TaggerGrads make_grads(const CrfTagger& t) {
  TaggerGrads g;
  g.fwd = zeros_like(t.fwd);
  g.bwd = zeros_like(t.bwd);
  g.proj = zeros_like(t.proj);
  g.transitions = Tensor(t.transitions.shape());
  return g;
}

void bind_refs(CrfTagger& t, TaggerGrads& g, ParamRefs& refs) {
  refs.add(t.fwd, g.fwd);
  refs.add(t.bwd, g.bwd);
  refs.add(t.proj, g.proj);
  refs.add(t.transitions, g.transitions);
}

// Forward both word-level LSTMs over the inputs, optionally caching for the
// backward pass, and project to emission scores.
Tensor run_emissions(const CrfTagger& t, const std::vector<Tensor>& xs,
                     std::vector<LstmCache>* fwd_cache,
                     std::vector<LstmCache>* bwd_cache, Tensor* feats_out) {
  const std::size_t n = xs.size();
  const std::size_t hid = static_cast<std::size_t>(t.config.hidden);
  const std::size_t k = t.tagset.size();

  Tensor feats({n, 2 * hid});
  std::vector<float> h(hid, 0.0f), c(hid, 0.0f);
  for (std::size_t i = 0; i < n; ++i) {
    lstm_cell(t.fwd, xs[i].data(), h.data(), c.data(), h.data(), c.data(),
              fwd_cache ? &(*fwd_cache)[i] : nullptr);
    std::copy(h.begin(), h.end(), feats.row(i));
  }
  std::fill(h.begin(), h.end(), 0.0f);
  std::fill(c.begin(), c.end(), 0.0f);
  for (std::size_t i = n; i-- > 0;) {
    lstm_cell(t.bwd, xs[i].data(), h.data(), c.data(), h.data(), c.data(),
              bwd_cache ? &(*bwd_cache)[i] : nullptr);
    std::copy(h.begin(), h.end(), feats.row(i) + hid);
  }

  Tensor em({n, k});
  for (std::size_t i = 0; i < n; ++i) {
    linear_forward(t.proj, feats.row(i), em.row(i));
  }
  if (feats_out) *feats_out = std::move(feats);
  return em;
}

// One training sentence: CRF loss scaled by `scale`, gradients accumulated.
double train_one(const CrfTagger& t, TaggerGrads& grads,
                 const std::vector<Tensor>& word_vecs,
                 const std::vector<int>& gold, float scale, Rng& rng) {
  const std::size_t n = word_vecs.size();
  const std::size_t d = t.embed_dim;
  const std::size_t hid = static_cast<std::size_t>(t.config.hidden);

  // Locked dropout: one mask shared by every position.
  std::vector<Tensor> xs = word_vecs;
  if (t.config.dropout > 0) {
    const float keep = 1.0f - static_cast<float>(t.config.dropout);
    Tensor mask({d});
    for (std::size_t j = 0; j < d; ++j) {
      mask[j] = rng.uniform() < keep ? 1.0f / keep : 0.0f;
    }
    for (auto& x : xs) x.mul_(mask);
  }

  std::vector<LstmCache> fwd_cache(n), bwd_cache(n);
  Tensor feats;
  Tensor em = run_emissions(t, xs, &fwd_cache, &bwd_cache, &feats);

  Tensor d_em(em.shape());
  double loss = crf_nll(em, t.transitions, std::span<const int>(gold), &d_em,
                        &grads.transitions, scale);

  // Through the projection into per-direction hidden-state gradients.
  Tensor dhf({n, hid}), dhb({n, hid});
  std::vector<float> dfeat(2 * hid);
  for (std::size_t i = 0; i < n; ++i) {
    linear_backward(t.proj, feats.row(i), d_em.row(i), grads.proj,
                    dfeat.data());
    std::copy(dfeat.begin(), dfeat.begin() + static_cast<long>(hid),
              dhf.row(i));
    std::copy(dfeat.begin() + static_cast<long>(hid), dfeat.end(),
              dhb.row(i));
  }

  // BPTT, each direction in reverse of its consumption order. The embedder
  // is frozen, so input gradients are dropped.
  std::vector<float> dh(hid), dc(hid, 0.0f), dh_prev(hid), dc_prev(hid);
  std::vector<float> dx(d);
  std::fill(dh.begin(), dh.end(), 0.0f);
  for (std::size_t i = n; i-- > 0;) {
    kernels::f32().add(hid, dhf.row(i), dh.data());
    lstm_cell_backward(t.fwd, fwd_cache[i], dh.data(), dc.data(), grads.fwd,
                       dx.data(), dh_prev.data(), dc_prev.data());
    dh.swap(dh_prev);
    dc.swap(dc_prev);
  }
  std::fill(dh.begin(), dh.end(), 0.0f);
  std::fill(dc.begin(), dc.end(), 0.0f);
  for (std::size_t i = 0; i < n; ++i) {
    kernels::f32().add(hid, dhb.row(i), dh.data());
    lstm_cell_backward(t.bwd, bwd_cache[i], dh.data(), dc.data(), grads.bwd,
                       dx.data(), dh_prev.data(), dc_prev.data());
    dh.swap(dh_prev);
    dc.swap(dc_prev);
  }
  return loss * scale;
}

}  // namespace

TagSet TagSet::from_data(const std::vector<TaggedSentence>& data) {
  TagSet set;
  for (const auto& s : data) {
    for (const auto& tag : s.tags) {
      if (set.ids_.emplace(tag, static_cast<int>(set.tags.size())).second) {
        set.tags.push_back(tag);
      }
    }
  }
  return set;
}

TagSet TagSet::from_tags(std::vector<std::string> tags) {
  TagSet set;
  set.tags = std::move(tags);
  for (std::size_t i = 0; i < set.tags.size(); ++i) {
    if (!set.ids_.emplace(set.tags[i], static_cast<int>(i)).second) {
      throw DataError("duplicate tag '" + set.tags[i] + "' in tag set");
    }
  }
  return set;
}

int TagSet::id(const std::string& tag) const {
  auto it = ids_.find(tag);
  return it == ids_.end() ? -1 : it->second;
}

void TaggerConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("tagger config: ") + what);
  };
  require(hidden > 0, "hidden must be positive");
  require(lr0 > 0, "lr0 must be positive");
  require(epochs > 0, "epochs must be positive");
  require(batch > 0, "batch must be positive");
  require(anneal_factor > 0 && anneal_factor < 1,
          "anneal_factor must be in (0, 1)");
  require(patience > 0, "patience must be positive");
  require(dropout >= 0 && dropout < 1, "dropout must be in [0, 1)");
  require(clip >= 0, "clip must be non-negative");
}

CrfTagger::CrfTagger(TaggerConfig cfg, TagSet tags,
                     std::shared_ptr<const Embedder> emb, std::uint64_t seed)
    : config(cfg), tagset(std::move(tags)), embedder(std::move(emb)) {
  config.validate();
  if (!embedder) throw ConfigError("tagger needs an embedder");
  if (tagset.size() == 0) throw DataError("tagger needs a non-empty tag set");

  embed_dim = embedder->dim();
  const std::size_t hid = static_cast<std::size_t>(config.hidden);
  Rng rng(seed);
  fwd = make_lstm<float>(embed_dim, hid, rng);
  bwd = make_lstm<float>(embed_dim, hid, rng);
  proj = make_linear<float>(2 * hid, tagset.size(), rng);
  transitions = make_transitions<float>(tagset.size(), rng);
}

void CrfTagger::set_embedder(std::shared_ptr<const Embedder> emb) {
  if (!emb) throw ConfigError("tagger needs an embedder");
  if (emb->dim() != embed_dim) {
    throw DataError("tagger expects embeddings of dim " +
                    std::to_string(embed_dim) + " but " + emb->describe() +
                    " produces dim " + std::to_string(emb->dim()));
  }
  embedder = std::move(emb);
}

Tensor CrfTagger::emissions(const std::vector<Tensor>& word_vecs) const {
  if (word_vecs.empty()) throw DataError("tagger: empty sentence");
  return run_emissions(*this, word_vecs, nullptr, nullptr, nullptr);
}

std::vector<std::string> CrfTagger::predict(const Sentence& s) const {
  auto vecs = embedder->embed(s);
  auto [path, score] = viterbi(emissions(vecs), transitions);
  (void)score;
  std::vector<std::string> tags;
  tags.reserve(path.size());
  for (int id : path) tags.push_back(tagset.tag(id));
  return tags;
}

std::vector<int> CrfTagger::tag_ids(const TaggedSentence& s) const {
  std::vector<int> ids;
  ids.reserve(s.tags.size());
  for (const auto& tag : s.tags) {
    int id = tagset.id(tag);
    if (id < 0) {
      throw DataError("unknown tag '" + tag + "' in sentence '" +
                      Sentence::from_tokens(s.tokens).joined() + "'");
    }
    ids.push_back(id);
  }
  return ids;
}

CrfTagger train_tagger(const TaggerConfig& config,
                       std::shared_ptr<const Embedder> embedder,
                       const std::vector<TaggedSentence>& train,
                       const std::vector<TaggedSentence>& dev,
                       std::uint64_t seed, HeadTrainLog* log) {
  config.validate();
  if (train.empty()) throw DataError("tagger: empty training set");
  if (dev.empty()) throw DataError("tagger: empty dev set");

  CrfTagger tagger(config, TagSet::from_data(train), std::move(embedder),
                   seed);

  std::vector<std::vector<int>> gold;
  gold.reserve(train.size());
  for (const auto& s : train) gold.push_back(tagger.tag_ids(s));
  for (const auto& s : dev) tagger.tag_ids(s);  // dev tags must be known

  TaggerGrads grads = make_grads(tagger);
  ParamRefs refs;
  bind_refs(tagger, grads, refs);

  LrSchedule sched;
  sched.lr = config.lr0;
  sched.decay = config.anneal_factor;
  sched.patience = config.patience;

  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  CrfTagger best = tagger;
  double best_f1 = -1;

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
        const auto& s = train[order[i]];
        auto vecs =
            tagger.embedder->embed(Sentence::from_tokens(s.tokens));
        batch_loss +=
            train_one(tagger, grads, vecs, gold[order[i]], scale, rng);
      }
      if (!std::isfinite(batch_loss)) {
        throw TrainError("non-finite tagger loss in epoch " +
                         std::to_string(epoch) + " (lr " +
                         std::to_string(sched.lr) + ")");
      }
      sgd_step(refs, sched.lr, config.clip);
      epoch_loss += batch_loss;
      ++batches;
    }

    double f1 = evaluate_tagger(tagger, dev).micro_f1;
    if (log) {
      log->push_back({epoch, epoch_loss / double(batches), f1, sched.lr});
    }
    if (f1 > best_f1) {
      best_f1 = f1;
      best = tagger;
    }
    sched.update(1.0 - f1);
  }
  return best;
}

TagReport evaluate_tagger(const CrfTagger& tagger,
                          const std::vector<TaggedSentence>& test) {
  if (test.empty()) throw DataError("tagger: empty test set");

  struct Counts {
    long tp = 0, fp = 0, fn = 0;
  };
  std::unordered_map<std::string, Counts> counts;
  std::vector<std::string> seen_order;
  auto touch = [&](const std::string& tag) -> Counts& {
    auto [it, fresh] = counts.try_emplace(tag);
    if (fresh) seen_order.push_back(tag);
    return it->second;
  };

  TagReport report;
  for (const auto& s : test) {
    auto pred = tagger.predict(Sentence::from_tokens(s.tokens));
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      ++report.total;
      if (pred[i] == s.tags[i]) {
        ++report.correct;
        ++touch(s.tags[i]).tp;
      } else {
        ++touch(pred[i]).fp;
        ++touch(s.tags[i]).fn;
      }
    }
  }

  // Rows in tag-set order, then any test-only tags in first-seen order.
  std::vector<std::string> ordered(tagger.tagset.tags);
  for (const auto& tag : seen_order) {
    if (tagger.tagset.id(tag) < 0) ordered.push_back(tag);
  }
  for (const auto& tag : ordered) {
    auto it = counts.find(tag);
    if (it == counts.end()) continue;
    const Counts& c = it->second;
    if (c.tp + c.fp + c.fn == 0) continue;
    TagReport::Row row;
    row.tag = tag;
    row.tp = c.tp;
    row.fp = c.fp;
    row.fn = c.fn;
    row.precision = c.tp + c.fp ? double(c.tp) / double(c.tp + c.fp) : 0.0;
    row.recall = c.tp + c.fn ? double(c.tp) / double(c.tp + c.fn) : 0.0;
    row.f1 = row.precision + row.recall
                 ? 2 * row.precision * row.recall /
                       (row.precision + row.recall)
                 : 0.0;
    report.rows.push_back(std::move(row));
  }
  report.micro_f1 = report.total ? double(report.correct) / double(report.total)
                                 : 0.0;
  return report;
}

std::string TagReport::render() const {
  std::size_t width = 8;
  for (const auto& row : rows) width = std::max(width, row.tag.size());
  char buf[160];
  std::string out;
  std::snprintf(buf, sizeof(buf), "%-*s  %9s  %9s  %9s\n",
                static_cast<int>(width), "tag", "precision", "recall",
                "f1");
  out += buf;
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof(buf), "%-*s  %9.4f  %9.4f  %9.4f\n",
                  static_cast<int>(width), row.tag.c_str(), row.precision,
                  row.recall, row.f1);
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "%-*s  %9s  %9s  %9.4f\n",
                static_cast<int>(width), "micro-F1", "", "", micro_f1);
  out += buf;
  return out;
}

}  // namespace csem
