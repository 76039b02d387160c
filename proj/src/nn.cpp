#include "csem/nn.hpp"

#include <cmath>
#include <string>

#include "csem/errors.hpp"

namespace csem {
namespace {

template <class T>
T sigmoid(T x) {
  if (x >= 0) {
    return T(1) / (T(1) + std::exp(-x));
  }
  T e = std::exp(x);
  return e / (T(1) + e);
}

template <class T>
void init_uniform(TensorT<T>& t, double bound, Rng& rng) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = static_cast<T>(rng.uniform(-bound, bound));
  }
}

template <class T>
void check_width(const TensorT<T>& t, std::size_t n, const char* what) {
  if (t.rank() != 1 || t.dim(0) != n) {
    throw ShapeError(std::string(what) + ": expected [" + std::to_string(n) +
                     "], got " + shape_string(t));
  }
}

}  // namespace

template <class T>
LinearParamsT<T> make_linear(std::size_t in, std::size_t out, Rng& rng) {
  LinearParamsT<T> p;
  p.in = in;
  p.out = out;
  p.w = TensorT<T>({out, in});
  p.b = TensorT<T>({out});
  init_uniform(p.w, 1.0 / std::sqrt(double(in)), rng);
  return p;
}

template <class T>
LstmParamsT<T> make_lstm(std::size_t input, std::size_t hidden, Rng& rng) {
  LstmParamsT<T> p;
  p.input = input;
  p.hidden = hidden;
  p.w_ih = TensorT<T>({4 * hidden, input});
  p.w_hh = TensorT<T>({4 * hidden, hidden});
  p.b = TensorT<T>({4 * hidden});
  double bound = 1.0 / std::sqrt(double(hidden));
  init_uniform(p.w_ih, bound, rng);
  init_uniform(p.w_hh, bound, rng);
  return p;
}

template <class T>
GruParamsT<T> make_gru(std::size_t input, std::size_t hidden, Rng& rng) {
  GruParamsT<T> p;
  p.input = input;
  p.hidden = hidden;
  p.w_ih = TensorT<T>({3 * hidden, input});
  p.w_hh = TensorT<T>({3 * hidden, hidden});
  p.b_ih = TensorT<T>({3 * hidden});
  p.b_hh = TensorT<T>({3 * hidden});
  double bound = 1.0 / std::sqrt(double(hidden));
  init_uniform(p.w_ih, bound, rng);
  init_uniform(p.w_hh, bound, rng);
  return p;
}

template <class T>
LinearParamsT<T> zeros_like(const LinearParamsT<T>& p) {
  LinearParamsT<T> g;
  g.in = p.in;
  g.out = p.out;
  g.w = TensorT<T>(p.w.shape());
  g.b = TensorT<T>(p.b.shape());
  return g;
}

template <class T>
LstmParamsT<T> zeros_like(const LstmParamsT<T>& p) {
  LstmParamsT<T> g;
  g.input = p.input;
  g.hidden = p.hidden;
  g.w_ih = TensorT<T>(p.w_ih.shape());
  g.w_hh = TensorT<T>(p.w_hh.shape());
  g.b = TensorT<T>(p.b.shape());
  return g;
}

template <class T>
GruParamsT<T> zeros_like(const GruParamsT<T>& p) {
  GruParamsT<T> g;
  g.input = p.input;
  g.hidden = p.hidden;
  g.w_ih = TensorT<T>(p.w_ih.shape());
  g.w_hh = TensorT<T>(p.w_hh.shape());
  g.b_ih = TensorT<T>(p.b_ih.shape());
  g.b_hh = TensorT<T>(p.b_hh.shape());
  return g;
}

template <class T>
void ParamRefsT<T>::add(TensorT<T>& p, TensorT<T>& g) {
  if (!p.same_shape(g)) {
    throw ShapeError("gradient shape " + shape_string(g) +
                     " does not match parameter shape " + shape_string(p));
  }
  params.push_back(&p);
  grads.push_back(&g);
}

template <class T>
void ParamRefsT<T>::add(LinearParamsT<T>& p, LinearParamsT<T>& g) {
  add(p.w, g.w);
  add(p.b, g.b);
}

template <class T>
void ParamRefsT<T>::add(LstmParamsT<T>& p, LstmParamsT<T>& g) {
  add(p.w_ih, g.w_ih);
  add(p.w_hh, g.w_hh);
  add(p.b, g.b);
}

template <class T>
void ParamRefsT<T>::add(GruParamsT<T>& p, GruParamsT<T>& g) {
  add(p.w_ih, g.w_ih);
  add(p.w_hh, g.w_hh);
  add(p.b_ih, g.b_ih);
  add(p.b_hh, g.b_hh);
}

template <class T>
void ParamRefsT<T>::zero_grads() {
  for (auto* g : grads) g->zero();
}

template <class T>
void lstm_cell(const LstmParamsT<T>& p, const T* x, const T* h_prev,
               const T* c_prev, T* h_out, T* c_out, LstmCacheT<T>* cache) {
  const std::size_t h = p.hidden, in = p.input;
  const auto& ops = kops<T>();

  std::vector<T> pre(p.b.data(), p.b.data() + 4 * h);
  ops.gemv_acc(4 * h, in, p.w_ih.data(), x, pre.data());
  ops.gemv_acc(4 * h, h, p.w_hh.data(), h_prev, pre.data());

  TensorT<T> gi({h}), gf({h}), gg({h}), go({h}), c_new({h});
  for (std::size_t j = 0; j < h; ++j) {
    gi[j] = sigmoid(pre[j]);
    gf[j] = sigmoid(pre[h + j]);
    gg[j] = std::tanh(pre[2 * h + j]);
    go[j] = sigmoid(pre[3 * h + j]);
    c_new[j] = gf[j] * c_prev[j] + gi[j] * gg[j];
  }
  if (cache) {
    cache->x = TensorT<T>::from({in}, std::vector<T>(x, x + in));
    cache->h_prev = TensorT<T>::from({h}, std::vector<T>(h_prev, h_prev + h));
    cache->c_prev = TensorT<T>::from({h}, std::vector<T>(c_prev, c_prev + h));
    cache->i = gi;
    cache->f = gf;
    cache->g = gg;
    cache->o = go;
    cache->c = c_new;
  }
  for (std::size_t j = 0; j < h; ++j) {
    h_out[j] = go[j] * std::tanh(c_new[j]);
    c_out[j] = c_new[j];
  }
}

template <class T>
std::pair<TensorT<T>, TensorT<T>> lstm_cell(const LstmParamsT<T>& p,
                                            const TensorT<T>& x,
                                            const TensorT<T>& h_prev,
                                            const TensorT<T>& c_prev) {
  check_width(x, p.input, "lstm_cell x");
  check_width(h_prev, p.hidden, "lstm_cell h_prev");
  check_width(c_prev, p.hidden, "lstm_cell c_prev");
  TensorT<T> h({p.hidden}), c({p.hidden});
  lstm_cell(p, x.data(), h_prev.data(), c_prev.data(), h.data(), c.data());
  return {std::move(h), std::move(c)};
}

template <class T>
void lstm_cell_backward(const LstmParamsT<T>& p, const LstmCacheT<T>& cache,
                        const T* dh, const T* dc, LstmParamsT<T>& grads,
                        T* dx, T* dh_prev, T* dc_prev) {
  const std::size_t h = p.hidden, in = p.input;
  if (cache.i.size() != h || cache.x.size() != in) {
    throw ShapeError("lstm_cell_backward: cache does not match params");
  }
  const auto& ops = kops<T>();

  std::vector<T> dpre(4 * h);
  for (std::size_t j = 0; j < h; ++j) {
    T th = std::tanh(cache.c[j]);
    T dct = dc[j] + dh[j] * cache.o[j] * (T(1) - th * th);
    T gi = cache.i[j], gf = cache.f[j], gg = cache.g[j], go = cache.o[j];
    dpre[j] = dct * gg * gi * (T(1) - gi);
    dpre[h + j] = dct * cache.c_prev[j] * gf * (T(1) - gf);
    dpre[2 * h + j] = dct * gi * (T(1) - gg * gg);
    dpre[3 * h + j] = dh[j] * th * go * (T(1) - go);
    dc_prev[j] = dct * gf;
  }

  for (std::size_t j = 0; j < in; ++j) dx[j] = 0;
  for (std::size_t j = 0; j < h; ++j) dh_prev[j] = 0;
  ops.gemv_t_acc(4 * h, in, p.w_ih.data(), dpre.data(), dx);
  ops.gemv_t_acc(4 * h, h, p.w_hh.data(), dpre.data(), dh_prev);
  ops.ger_acc(4 * h, in, grads.w_ih.data(), dpre.data(), cache.x.data());
  ops.ger_acc(4 * h, h, grads.w_hh.data(), dpre.data(), cache.h_prev.data());
  ops.add(4 * h, dpre.data(), grads.b.data());
}

template <class T>
void gru_cell(const GruParamsT<T>& p, const T* x, const T* h_prev, T* h_out,
              GruCacheT<T>* cache) {
  const std::size_t h = p.hidden, in = p.input;
  const auto& ops = kops<T>();

  std::vector<T> pi(p.b_ih.data(), p.b_ih.data() + 3 * h);
  std::vector<T> ph(p.b_hh.data(), p.b_hh.data() + 3 * h);
  ops.gemv_acc(3 * h, in, p.w_ih.data(), x, pi.data());
  ops.gemv_acc(3 * h, h, p.w_hh.data(), h_prev, ph.data());

  TensorT<T> r({h}), z({h}), n({h}), u({h});
  for (std::size_t j = 0; j < h; ++j) {
    r[j] = sigmoid(pi[j] + ph[j]);
    z[j] = sigmoid(pi[h + j] + ph[h + j]);
    u[j] = ph[2 * h + j];
    n[j] = std::tanh(pi[2 * h + j] + r[j] * u[j]);
  }
  if (cache) {
    cache->x = TensorT<T>::from({in}, std::vector<T>(x, x + in));
    cache->h_prev = TensorT<T>::from({h}, std::vector<T>(h_prev, h_prev + h));
    cache->r = r;
    cache->z = z;
    cache->n = n;
    cache->u = u;
  }
  for (std::size_t j = 0; j < h; ++j) {
    h_out[j] = (T(1) - z[j]) * n[j] + z[j] * h_prev[j];
  }
}

template <class T>
TensorT<T> gru_cell(const GruParamsT<T>& p, const TensorT<T>& x,
                    const TensorT<T>& h_prev) {
  check_width(x, p.input, "gru_cell x");
  check_width(h_prev, p.hidden, "gru_cell h_prev");
  TensorT<T> h({p.hidden});
  gru_cell(p, x.data(), h_prev.data(), h.data());
  return h;
}

template <class T>
void gru_cell_backward(const GruParamsT<T>& p, const GruCacheT<T>& cache,
                       const T* dh, GruParamsT<T>& grads, T* dx, T* dh_prev) {
  const std::size_t h = p.hidden, in = p.input;
  if (cache.r.size() != h || cache.x.size() != in) {
    throw ShapeError("gru_cell_backward: cache does not match params");
  }
  const auto& ops = kops<T>();

  // dpre_i: gradient w.r.t. (W x + b_ih); dpre_h: w.r.t. (U h_prev + b_hh).
  std::vector<T> dpre_i(3 * h), dpre_h(3 * h);
  for (std::size_t j = 0; j < h; ++j) {
    T r = cache.r[j], z = cache.z[j], n = cache.n[j], u = cache.u[j];
    T hp = cache.h_prev[j];
    T dn_pre = dh[j] * (T(1) - z) * (T(1) - n * n);
    T dz_pre = dh[j] * (hp - n) * z * (T(1) - z);
    T dr_pre = dn_pre * u * r * (T(1) - r);
    dpre_i[j] = dr_pre;
    dpre_h[j] = dr_pre;
    dpre_i[h + j] = dz_pre;
    dpre_h[h + j] = dz_pre;
    dpre_i[2 * h + j] = dn_pre;
    dpre_h[2 * h + j] = dn_pre * r;
    dh_prev[j] = dh[j] * z;
  }

  for (std::size_t j = 0; j < in; ++j) dx[j] = 0;
  ops.gemv_t_acc(3 * h, in, p.w_ih.data(), dpre_i.data(), dx);
  ops.gemv_t_acc(3 * h, h, p.w_hh.data(), dpre_h.data(), dh_prev);
  ops.ger_acc(3 * h, in, grads.w_ih.data(), dpre_i.data(), cache.x.data());
  ops.ger_acc(3 * h, h, grads.w_hh.data(), dpre_h.data(),
              cache.h_prev.data());
  ops.add(3 * h, dpre_i.data(), grads.b_ih.data());
  ops.add(3 * h, dpre_h.data(), grads.b_hh.data());
}

template <class T>
void linear_forward(const LinearParamsT<T>& p, const T* x, T* y) {
  for (std::size_t r = 0; r < p.out; ++r) y[r] = p.b[r];
  kops<T>().gemv_acc(p.out, p.in, p.w.data(), x, y);
}

template <class T>
void linear_backward(const LinearParamsT<T>& p, const T* x, const T* dy,
                     LinearParamsT<T>& grads, T* dx) {
  const auto& ops = kops<T>();
  ops.ger_acc(p.out, p.in, grads.w.data(), dy, x);
  ops.add(p.out, dy, grads.b.data());
  if (dx) {
    for (std::size_t j = 0; j < p.in; ++j) dx[j] = 0;
    ops.gemv_t_acc(p.out, p.in, p.w.data(), dy, dx);
  }
}

template <class T>
T softmax_xent(std::span<const T> logits, int target, std::span<T> dlogits) {
  const std::size_t k = logits.size();
  if (target < 0 || static_cast<std::size_t>(target) >= k) {
    throw DataError("softmax_xent: target " + std::to_string(target) +
                    " out of range for " + std::to_string(k) + " classes");
  }
  T m = logits[0];
  for (std::size_t j = 1; j < k; ++j) m = std::max(m, logits[j]);
  T s = 0;
  for (std::size_t j = 0; j < k; ++j) s += std::exp(logits[j] - m);
  T log_z = m + std::log(s);
  T loss = log_z - logits[static_cast<std::size_t>(target)];
  if (!dlogits.empty()) {
    if (dlogits.size() != k) {
      throw ShapeError("softmax_xent: dlogits size mismatch");
    }
    for (std::size_t j = 0; j < k; ++j) {
      dlogits[j] = std::exp(logits[j] - m) / s;
    }
    dlogits[static_cast<std::size_t>(target)] -= T(1);
  }
  return loss;
}

template <class T>
int argmax_lowest(std::span<const T> v) {
  int best = 0;
  for (std::size_t j = 1; j < v.size(); ++j) {
    if (v[j] > v[static_cast<std::size_t>(best)]) best = static_cast<int>(j);
  }
  return best;
}

template <class T>
double sgd_step(ParamRefsT<T>& refs, double lr, double clip) {
  double norm_sq = 0;
  for (auto* g : refs.grads) {
    const T* d = g->data();
    for (std::size_t i = 0; i < g->size(); ++i) {
      norm_sq += double(d[i]) * double(d[i]);
    }
  }
  double norm = std::sqrt(norm_sq);
  if (!std::isfinite(norm)) {
    throw TrainError("non-finite gradient (global norm = " +
                     std::to_string(norm) + ")");
  }
  double scale = (clip > 0 && norm > clip) ? clip / norm : 1.0;
  for (std::size_t i = 0; i < refs.params.size(); ++i) {
    refs.params[i]->axpy_(static_cast<T>(-lr * scale), *refs.grads[i]);
  }
  refs.zero_grads();
  return norm;
}

#define CSEM_INSTANTIATE_NN(T)                                                \
  template LinearParamsT<T> make_linear<T>(std::size_t, std::size_t, Rng&);   \
  template LstmParamsT<T> make_lstm<T>(std::size_t, std::size_t, Rng&);       \
  template GruParamsT<T> make_gru<T>(std::size_t, std::size_t, Rng&);         \
  template LinearParamsT<T> zeros_like<T>(const LinearParamsT<T>&);           \
  template LstmParamsT<T> zeros_like<T>(const LstmParamsT<T>&);               \
  template GruParamsT<T> zeros_like<T>(const GruParamsT<T>&);                 \
  template struct ParamRefsT<T>;                                              \
  template void lstm_cell<T>(const LstmParamsT<T>&, const T*, const T*,       \
                             const T*, T*, T*, LstmCacheT<T>*);               \
  template std::pair<TensorT<T>, TensorT<T>> lstm_cell<T>(                    \
      const LstmParamsT<T>&, const TensorT<T>&, const TensorT<T>&,            \
      const TensorT<T>&);                                                     \
  template void lstm_cell_backward<T>(const LstmParamsT<T>&,                  \
                                      const LstmCacheT<T>&, const T*,         \
                                      const T*, LstmParamsT<T>&, T*, T*, T*); \
  template void gru_cell<T>(const GruParamsT<T>&, const T*, const T*, T*,     \
                            GruCacheT<T>*);                                   \
  template TensorT<T> gru_cell<T>(const GruParamsT<T>&, const TensorT<T>&,    \
                                  const TensorT<T>&);                         \
  template void gru_cell_backward<T>(const GruParamsT<T>&,                    \
                                     const GruCacheT<T>&, const T*,           \
                                     GruParamsT<T>&, T*, T*);                 \
  template void linear_forward<T>(const LinearParamsT<T>&, const T*, T*);     \
  template void linear_backward<T>(const LinearParamsT<T>&, const T*,         \
                                   const T*, LinearParamsT<T>&, T*);          \
  template T softmax_xent<T>(std::span<const T>, int, std::span<T>);          \
  template int argmax_lowest<T>(std::span<const T>);                          \
  template double sgd_step<T>(ParamRefsT<T>&, double, double);

CSEM_INSTANTIATE_NN(float)
CSEM_INSTANTIATE_NN(double)

#undef CSEM_INSTANTIATE_NN

}  // namespace csem
