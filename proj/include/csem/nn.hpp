#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "csem/rng.hpp"
#include "csem/tensor.hpp"

namespace csem {

template <class T>
struct LinearParamsT {
  TensorT<T> w;  // [out x in]
  TensorT<T> b;  // [out]
  std::size_t in = 0, out = 0;
};

// Gate order along the 4H axis is fixed as (input, forget, cell candidate,
// output); serialization depends on it.
template <class T>
struct LstmParamsT {
  TensorT<T> w_ih;  // [4H x I]
  TensorT<T> w_hh;  // [4H x H]
  TensorT<T> b;     // [4H]
  std::size_t input = 0, hidden = 0;
};

// Gate order along the 3H axis is fixed as (reset, update, candidate).
// The candidate term is tanh(W_n x + b_in + r * (U_n h_prev + b_hn)).
template <class T>
struct GruParamsT {
  TensorT<T> w_ih;  // [3H x I]
  TensorT<T> w_hh;  // [3H x H]
  TensorT<T> b_ih;  // [3H]
  TensorT<T> b_hh;  // [3H]
  std::size_t input = 0, hidden = 0;
};

using LinearParams = LinearParamsT<float>;
using LstmParams = LstmParamsT<float>;
using GruParams = GruParamsT<float>;

// Weights drawn uniform in [-1/sqrt(fan), +1/sqrt(fan)]: fan = hidden size
// for the recurrent cells, fan = input width for linear layers. Biases zero.
template <class T>
LinearParamsT<T> make_linear(std::size_t in, std::size_t out, Rng& rng);
template <class T>
LstmParamsT<T> make_lstm(std::size_t input, std::size_t hidden, Rng& rng);
template <class T>
GruParamsT<T> make_gru(std::size_t input, std::size_t hidden, Rng& rng);

template <class T>
LinearParamsT<T> zeros_like(const LinearParamsT<T>& p);
template <class T>
LstmParamsT<T> zeros_like(const LstmParamsT<T>& p);
template <class T>
GruParamsT<T> zeros_like(const GruParamsT<T>& p);

// Flat registry pairing each parameter tensor with its gradient buffer.
// sgd_step clips and updates everything registered here in one shot.
template <class T>
struct ParamRefsT {
  std::vector<TensorT<T>*> params;
  std::vector<TensorT<T>*> grads;

  void add(TensorT<T>& p, TensorT<T>& g);
  void add(LinearParamsT<T>& p, LinearParamsT<T>& g);
  void add(LstmParamsT<T>& p, LstmParamsT<T>& g);
  void add(GruParamsT<T>& p, GruParamsT<T>& g);
  void zero_grads();
};

using ParamRefs = ParamRefsT<float>;

// Forward state captured for the exact backward pass.
template <class T>
struct LstmCacheT {
  TensorT<T> x, h_prev, c_prev;
  TensorT<T> i, f, g, o, c;
};

template <class T>
struct GruCacheT {
  TensorT<T> x, h_prev;
  TensorT<T> r, z, n, u;  // u = U_n h_prev + b_hn, before the reset gate
};

using LstmCache = LstmCacheT<float>;
using GruCache = GruCacheT<float>;

// Pointer forms run inside the sequence loops; x/h/c widths are taken from p.
// h_out/c_out may alias h_prev/c_prev. Passing a cache captures the forward
// state needed by the backward pass.
template <class T>
void lstm_cell(const LstmParamsT<T>& p, const T* x, const T* h_prev,
               const T* c_prev, T* h_out, T* c_out,
               LstmCacheT<T>* cache = nullptr);

template <class T>
std::pair<TensorT<T>, TensorT<T>> lstm_cell(const LstmParamsT<T>& p,
                                            const TensorT<T>& x,
                                            const TensorT<T>& h_prev,
                                            const TensorT<T>& c_prev);

// dx/dh_prev/dc_prev are overwritten; parameter gradients accumulate.
template <class T>
void lstm_cell_backward(const LstmParamsT<T>& p, const LstmCacheT<T>& cache,
                        const T* dh, const T* dc, LstmParamsT<T>& grads,
                        T* dx, T* dh_prev, T* dc_prev);

template <class T>
void gru_cell(const GruParamsT<T>& p, const T* x, const T* h_prev, T* h_out,
              GruCacheT<T>* cache = nullptr);

template <class T>
TensorT<T> gru_cell(const GruParamsT<T>& p, const TensorT<T>& x,
                    const TensorT<T>& h_prev);

template <class T>
void gru_cell_backward(const GruParamsT<T>& p, const GruCacheT<T>& cache,
                       const T* dh, GruParamsT<T>& grads, T* dx, T* dh_prev);

// y = W x + b (y overwritten).
template <class T>
void linear_forward(const LinearParamsT<T>& p, const T* x, T* y);

// Gradients accumulate; dx is overwritten and may be null.
template <class T>
void linear_backward(const LinearParamsT<T>& p, const T* x, const T* dy,
                     LinearParamsT<T>& grads, T* dx);

// Cross entropy with max-subtracted softmax. Returns the loss; when dlogits
// is non-empty it receives softmax(logits) - onehot(target).
template <class T>
T softmax_xent(std::span<const T> logits, int target, std::span<T> dlogits);

template <class T>
T softmax_xent(std::span<const T> logits, int target) {
  return softmax_xent(logits, target, std::span<T>{});
}

// First index of the maximum: argmax ties break toward the lowest id.
template <class T>
int argmax_lowest(std::span<const T> v);

// Clips all registered gradients to `clip` by global L2 norm (clip <= 0
// disables clipping), applies params -= lr * grad, zeroes the tape. Returns
// the pre-clip norm. Throws TrainError when the norm is non-finite.
template <class T>
double sgd_step(ParamRefsT<T>& refs, double lr, double clip);

}  // namespace csem
