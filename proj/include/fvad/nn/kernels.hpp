#pragma once

// Forward kernels for the network primitives. Row layout for sequence
// batches: row b*steps + t holds time step t of sequence b.

#include "fvad/nn/tensor.hpp"

#include <vector>

namespace fvad::nn {

enum class Activation { kIdentity, kGelu, kSigmoid };
enum class Direction { kForward, kBackward };

struct SeqLayout {
  Index batch = 1;
  Index steps = 0;
  Index rows() const { return batch * steps; }
};

template <typename S>
S gelu(S x);
// d/dx of the tanh-approximated GELU.
template <typename S>
S gelu_grad(S x);
template <typename S>
S sigmoid(S x);

template <typename S>
Matrix<S> apply_activation(const Matrix<S>& z, Activation act);

// y = act(x W + b). W is Din x Dout, b is 1 x Dout.
template <typename S>
Matrix<S> dense_forward(const Matrix<S>& x, const Matrix<S>& w, const Matrix<S>& b,
                        Activation act);

// Per-row normalization with 1/d variance and eps = 1e-5.
inline constexpr double kLayerNormEps = 1e-5;
template <typename S>
Matrix<S> layer_norm(const Matrix<S>& x, const Matrix<S>& gamma, const Matrix<S>& beta);

// Gate order along the 4H axis: input, forget, candidate, output.
template <typename S>
struct LstmWeights {
  const Matrix<S>* w_ih = nullptr;  // Din x 4H
  const Matrix<S>* w_hh = nullptr;  // H x 4H
  const Matrix<S>* bias = nullptr;  // 1 x 4H
  Index hidden() const { return w_hh->rows(); }
};

template <typename S>
struct LstmCache {
  // Indexed by processing step s (s = t forward, s = T-1-t backward).
  std::vector<Matrix<S>> gates;      // B x 4H, post-activation
  std::vector<Matrix<S>> cell;       // B x H
  std::vector<Matrix<S>> tanh_cell;  // B x H
  std::vector<Matrix<S>> hidden;     // B x H
};

template <typename S>
Matrix<S> lstm_forward_batched(const Matrix<S>& x, const LstmWeights<S>& w, SeqLayout layout,
                               Direction dir, LstmCache<S>* cache);

// Single sequence, zero initial state. x is T x Din, result T x H.
template <typename S>
Matrix<S> lstm_forward(const Matrix<S>& x, const LstmWeights<S>& w, Direction dir);

template <typename S>
struct AttentionWeights {
  const Matrix<S>* wq = nullptr;  // d x d
  const Matrix<S>* bq = nullptr;  // 1 x d
  const Matrix<S>* wk = nullptr;
  const Matrix<S>* bk = nullptr;
  const Matrix<S>* wv = nullptr;
  const Matrix<S>* bv = nullptr;
  const Matrix<S>* wo = nullptr;
  const Matrix<S>* bo = nullptr;
};

template <typename S>
struct AttentionCache {
  Matrix<S> q, k, v;              // projected, rows as in the layouts
  Matrix<S> heads;                // concatenated per-head outputs, before Wo
  std::vector<Matrix<S>> probs;   // [b * n_heads + h], Tq x Tk
};

// Queries in q_layout, keys/values in kv_layout; batch sizes must agree.
template <typename S>
Matrix<S> attention_forward_batched(const Matrix<S>& q, const Matrix<S>& k, const Matrix<S>& v,
                                    const AttentionWeights<S>& w, int n_heads, SeqLayout q_layout,
                                    SeqLayout kv_layout, AttentionCache<S>* cache);

// Single sequence: q is T x d, k and v are S x d.
template <typename S>
Matrix<S> multihead_attention(const Matrix<S>& q, const Matrix<S>& k, const Matrix<S>& v,
                              const AttentionWeights<S>& w, int n_heads);

inline constexpr double kBceClamp = 1e-7;

// -mean(y log p + (1-y) log(1-p)) with p clamped to [1e-7, 1-1e-7].
template <typename S>
S bce_loss(const Matrix<S>& p, const Matrix<S>& y);

}  // namespace fvad::nn
