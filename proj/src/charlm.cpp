#include "csem/charlm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <thread>

#include "csem/errors.hpp"

namespace csem {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("charlm config: " + what);
}

// Advances one character through the LSTM stack; h/c are [layers][H] and are
// updated in place. Returns a pointer to the top layer's hidden state.
const float* advance(const CharLM& model, std::int32_t id,
                     std::vector<std::vector<float>>& h,
                     std::vector<std::vector<float>>& c) {
  const float* input = model.embedding.row(static_cast<std::size_t>(id));
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    lstm_cell(model.layers[l], input, h[l].data(), c[l].data(), h[l].data(),
              c[l].data());
    input = h[l].data();
  }
  return input;
}

void check_id(const CharLM& model, std::int32_t id) {
  if (id < 0 || id >= model.vocab()) {
    throw DataError("character id " + std::to_string(id) +
                    " out of range for vocabulary of " +
                    std::to_string(model.vocab()));
  }
}

// Per-line NLL with a fresh state: (sum of -log p, prediction count).
std::pair<double, long> line_nll(const CharLM& model,
                                 const std::vector<std::int32_t>& ids) {
  const std::size_t L = model.layers.size(), H = model.hidden();
  const std::size_t v = static_cast<std::size_t>(model.vocab());
  std::vector<std::vector<float>> h(L, std::vector<float>(H, 0.0f));
  std::vector<std::vector<float>> c(L, std::vector<float>(H, 0.0f));
  std::vector<float> logits(v);
  double nll = 0;
  for (std::size_t t = 0; t + 1 < ids.size(); ++t) {
    const float* top = advance(model, ids[t], h, c);
    linear_forward(model.out, top, logits.data());
    nll += softmax_xent<float>(std::span<const float>(logits.data(), v),
                               ids[t + 1]);
  }
  return {nll, static_cast<long>(ids.size()) - 1};
}

}  // namespace

void CharLMConfig::validate() const {
  require(embed_dim > 0, "embed_dim must be positive");
  require(hidden > 0, "hidden must be positive");
  require(layers > 0, "layers must be positive");
  require(seq_len > 0, "seq_len must be positive");
  require(batch > 0, "batch must be positive");
  require(lr0 > 0, "lr0 must be positive");
  require(anneal_factor > 1, "anneal_factor must be greater than 1");
  require(patience > 0, "patience must be positive");
  require(epochs > 0, "epochs must be positive");
  require(shards > 0, "shards must be positive");
  require(clip >= 0, "clip must be non-negative");
  require(max_chars > 0, "max_chars must be positive");
}

CharLM::CharLM(CharLMConfig cfg, CharDictionary d, Rng& rng)
    : config(cfg), dict(std::move(d)) {
  config.validate();
  const auto v = static_cast<std::size_t>(dict.size());
  const auto e = static_cast<std::size_t>(config.embed_dim);
  const auto hid = static_cast<std::size_t>(config.hidden);

  embedding = Tensor({v, e});
  double bound = 1.0 / std::sqrt(double(e));
  for (std::size_t i = 0; i < embedding.size(); ++i) {
    embedding[i] = static_cast<float>(rng.uniform(-bound, bound));
  }
  layers.reserve(static_cast<std::size_t>(config.layers));
  for (int l = 0; l < config.layers; ++l) {
    layers.push_back(make_lstm<float>(l == 0 ? e : hid, hid, rng));
  }
  out = make_linear<float>(hid, v, rng);
}

CharLMGrads make_grads(const CharLM& model) {
  CharLMGrads g;
  g.embedding = Tensor(model.embedding.shape());
  for (const auto& layer : model.layers) g.layers.push_back(zeros_like(layer));
  g.out = zeros_like(model.out);
  return g;
}

void bind_refs(CharLM& model, CharLMGrads& grads, ParamRefs& refs) {
  refs.add(model.embedding, grads.embedding);
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    refs.add(model.layers[l], grads.layers[l]);
  }
  refs.add(model.out, grads.out);
}

LmState LmState::zeros(const CharLM& model, std::size_t batch) {
  LmState s;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    s.h.emplace_back(Tensor({batch, model.hidden()}));
    s.c.emplace_back(Tensor({batch, model.hidden()}));
  }
  return s;
}

double lm_step(const CharLM& model, const IdMatrix& window, LmState& state,
               CharLMGrads* grads) {
  const std::size_t rows = window.rows, w = window.cols;
  const std::size_t layer_count = model.layers.size(), hid = model.hidden();
  const std::size_t e = static_cast<std::size_t>(model.config.embed_dim);
  const std::size_t v = static_cast<std::size_t>(model.vocab());
  if (w < 2) throw DataError("lm_step: window must hold at least 2 ids");
  if (state.batch() != rows) {
    throw ShapeError("lm_step: state batch " + std::to_string(state.batch()) +
                     " does not match window rows " + std::to_string(rows));
  }
  for (std::int32_t id : window.ids) check_id(model, id);

  const std::size_t steps = w - 1;
  const float scale = 1.0f / static_cast<float>(rows * steps);
  double total = 0;

  std::vector<float> logits(v);
  std::vector<std::vector<LstmCache>> caches;
  std::vector<std::vector<float>> dlogits;

  for (std::size_t b = 0; b < rows; ++b) {
    std::vector<std::vector<float>> h(layer_count), c(layer_count);
    for (std::size_t l = 0; l < layer_count; ++l) {
      h[l].assign(state.h[l].row(b), state.h[l].row(b) + hid);
      c[l].assign(state.c[l].row(b), state.c[l].row(b) + hid);
    }
    if (grads) {
      caches.assign(steps, std::vector<LstmCache>(layer_count));
      dlogits.assign(steps, {});
    }

    for (std::size_t t = 0; t < steps; ++t) {
      const float* input =
          model.embedding.row(static_cast<std::size_t>(window.at(b, t)));
      for (std::size_t l = 0; l < layer_count; ++l) {
        lstm_cell(model.layers[l], input, h[l].data(), c[l].data(),
                  h[l].data(), c[l].data(), grads ? &caches[t][l] : nullptr);
        input = h[l].data();
      }
      linear_forward(model.out, input, logits.data());
      int target = window.at(b, t + 1);
      if (grads) {
        dlogits[t].resize(v);
        total += softmax_xent<float>(std::span<const float>(logits.data(), v),
                                     target,
                                     std::span<float>(dlogits[t].data(), v));
        kernels::f32().scale(v, scale, dlogits[t].data());
      } else {
        total += softmax_xent<float>(std::span<const float>(logits.data(), v),
                                     target);
      }
    }

    if (grads) {
      // Backward through the window; the carried-in state is a constant.
      std::vector<std::vector<float>> dh(layer_count,
                                         std::vector<float>(hid, 0.0f));
      std::vector<std::vector<float>> dc(layer_count,
                                         std::vector<float>(hid, 0.0f));
      std::vector<float> top_h(hid), dtop(hid), dx_h(hid), dx_e(e);
      std::vector<float> dh_prev(hid), dc_prev(hid);
      for (std::size_t t = steps; t-- > 0;) {
        const LstmCache& top = caches[t][layer_count - 1];
        for (std::size_t j = 0; j < hid; ++j) {
          top_h[j] = top.o[j] * std::tanh(top.c[j]);
        }
        linear_backward(model.out, top_h.data(), dlogits[t].data(),
                        grads->out, dtop.data());
        kernels::f32().add(hid, dtop.data(), dh[layer_count - 1].data());

        for (std::size_t l = layer_count; l-- > 0;) {
          float* dx = (l == 0) ? dx_e.data() : dx_h.data();
          lstm_cell_backward(model.layers[l], caches[t][l], dh[l].data(),
                             dc[l].data(), grads->layers[l], dx,
                             dh_prev.data(), dc_prev.data());
          dh[l] = dh_prev;
          dc[l] = dc_prev;
          if (l > 0) kernels::f32().add(hid, dx, dh[l - 1].data());
        }
        kernels::f32().add(
            e, dx_e.data(),
            grads->embedding.row(static_cast<std::size_t>(window.at(b, t))));
      }
    }

    for (std::size_t l = 0; l < layer_count; ++l) {
      std::copy(h[l].begin(), h[l].end(), state.h[l].row(b));
      std::copy(c[l].begin(), c[l].end(), state.c[l].row(b));
    }
  }
  return total / double(rows * steps);
}

void append_lm_log(const LmTrainLog& log, const std::string& path) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot open log file " + path);
  char buf[160];
  for (const auto& cp : log) {
    std::snprintf(buf, sizeof(buf), "%ld\t%.9g\t%.9g\t%.9g\n", cp.step,
                  cp.train_loss, cp.valid_ppl, cp.lr);
    out << buf;
  }
}

std::vector<std::int32_t> lm_stream(const CharDictionary& dict,
                                    const std::vector<std::string>& lines,
                                    bool backward) {
  std::vector<std::int32_t> stream{CharDictionary::kBoundary};
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) stream.push_back(CharDictionary::kBoundary);
    auto ids = dict.encode(lines[i]);
    stream.insert(stream.end(), ids.begin(), ids.end());
  }
  if (backward) std::reverse(stream.begin(), stream.end());
  return stream;
}

CharLM train_lm(const CharLMConfig& config,
                const std::vector<std::string>& train_lines,
                const std::vector<std::string>& valid_lines,
                std::uint64_t seed, LmTrainLog* log,
                const CharDictionary* dict) {
  config.validate();
  if (train_lines.empty()) throw DataError("train stream is empty");
  if (valid_lines.empty()) throw DataError("validation stream is empty");

  Rng rng(seed);
  CharDictionary d =
      dict ? *dict : build_char_dictionary(train_lines, config.max_chars);
  CharLM model(config, std::move(d), rng);

  auto stream = lm_stream(model.dict, train_lines, config.backward);
  const std::size_t s = static_cast<std::size_t>(config.seq_len);
  std::size_t batch = std::min<std::size_t>(
      static_cast<std::size_t>(config.batch), stream.size() / (s + 1));
  if (batch == 0) {
    throw DataError("training stream of " + std::to_string(stream.size()) +
                    " characters is too short for seq_len " +
                    std::to_string(config.seq_len));
  }
  const std::size_t strip = stream.size() / batch;
  const std::size_t nwin = (strip - 1) / s;
  const int shards = std::clamp(config.shards, 1, static_cast<int>(nwin));

  CharLMGrads grads = make_grads(model);
  ParamRefs refs;
  bind_refs(model, grads, refs);

  LrSchedule sched;
  sched.lr = config.lr0;
  sched.decay = 1.0 / config.anneal_factor;
  sched.patience = config.patience;

  double best_ppl = perplexity(model, valid_lines);
  CharLM best = model;
  if (log) {
    log->push_back({0, std::numeric_limits<double>::quiet_NaN(), best_ppl,
                    sched.lr});
  }

  long step = 0;
  IdMatrix win(batch, s + 1);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (int shard = 0; shard < shards; ++shard) {
      const std::size_t w0 = nwin * static_cast<std::size_t>(shard) /
                             static_cast<std::size_t>(shards);
      const std::size_t w1 = nwin * (static_cast<std::size_t>(shard) + 1) /
                             static_cast<std::size_t>(shards);
      if (w0 == w1) continue;
      LmState state = LmState::zeros(model, batch);
      double loss_sum = 0;
      long loss_count = 0;
      for (std::size_t w = w0; w < w1; ++w) {
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t j = 0; j <= s; ++j) {
            win.at(b, j) = stream[b * strip + w * s + j];
          }
        }
        double loss = lm_step(model, win, state, &grads);
        if (!std::isfinite(loss)) {
          throw TrainError("non-finite training loss at step " +
                           std::to_string(step) + " (lr " +
                           std::to_string(sched.lr) + ")");
        }
        try {
          sgd_step(refs, sched.lr, config.clip);
        } catch (const TrainError& e) {
          throw TrainError(std::string(e.what()) + " at step " +
                           std::to_string(step) + " (lr " +
                           std::to_string(sched.lr) + ")");
        }
        loss_sum += loss;
        ++loss_count;
        ++step;
      }
      double ppl = perplexity(model, valid_lines);
      if (log) {
        log->push_back({step, loss_sum / double(loss_count), ppl, sched.lr});
      }
      if (ppl < best_ppl) {
        best_ppl = ppl;
        best = model;
      }
      sched.update(ppl);
    }
  }
  return best;
}

double perplexity(const CharLM& model, const std::vector<std::string>& lines,
                  int threads) {
  std::vector<std::vector<std::int32_t>> encoded;
  for (const auto& line : lines) {
    auto ids = model.dict.encode(line);
    if (ids.empty()) continue;
    ids.insert(ids.begin(), CharDictionary::kBoundary);
    if (model.config.backward) std::reverse(ids.begin(), ids.end());
    encoded.push_back(std::move(ids));
  }
  if (encoded.empty()) {
    throw DataError("perplexity: no characters to evaluate");
  }

  const int workers =
      std::clamp<int>(threads, 1, static_cast<int>(encoded.size()));
  std::vector<double> nll(static_cast<std::size_t>(workers), 0.0);
  std::vector<long> count(static_cast<std::size_t>(workers), 0);

  auto run = [&](int worker) {
    const std::size_t n = encoded.size();
    const std::size_t lo = n * static_cast<std::size_t>(worker) /
                           static_cast<std::size_t>(workers);
    const std::size_t hi = n * (static_cast<std::size_t>(worker) + 1) /
                           static_cast<std::size_t>(workers);
    for (std::size_t i = lo; i < hi; ++i) {
      auto [sum, preds] = line_nll(model, encoded[i]);
      nll[static_cast<std::size_t>(worker)] += sum;
      count[static_cast<std::size_t>(worker)] += preds;
    }
  };

  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(run, t);
    for (auto& t : pool) t.join();
  }

  double total_nll = 0;
  long total_count = 0;
  for (int t = 0; t < workers; ++t) {
    total_nll += nll[static_cast<std::size_t>(t)];
    total_count += count[static_cast<std::size_t>(t)];
  }
  return std::exp(total_nll / double(total_count));
}

std::vector<Tensor> lm_hidden_states(
    const CharLM& model, const std::vector<std::int32_t>& ids,
    const std::vector<std::size_t>& positions) {
  const std::size_t layer_count = model.layers.size(), hid = model.hidden();
  for (std::int32_t id : ids) check_id(model, id);
  for (std::size_t i = 1; i < positions.size(); ++i) {
    if (positions[i] < positions[i - 1]) {
      throw DataError("lm_hidden_states: positions must be sorted");
    }
  }
  if (!positions.empty() && positions.back() >= ids.size()) {
    throw DataError("lm_hidden_states: position beyond the stream");
  }

  std::vector<std::vector<float>> h(layer_count,
                                    std::vector<float>(hid, 0.0f));
  std::vector<std::vector<float>> c(layer_count,
                                    std::vector<float>(hid, 0.0f));
  std::vector<Tensor> out;
  out.reserve(positions.size());
  std::size_t next = 0;
  for (std::size_t t = 0; t < ids.size() && next < positions.size(); ++t) {
    const float* top = advance(model, ids[t], h, c);
    while (next < positions.size() && positions[next] == t) {
      out.push_back(Tensor::from({hid}, std::vector<float>(top, top + hid)));
      ++next;
    }
  }
  return out;
}

}  // namespace csem
