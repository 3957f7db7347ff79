#include "fvad/nn/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fvad::nn {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

namespace {

constexpr double kSqrt2OverPi = 0.7978845608028654;
constexpr double kGeluCubic = 0.044715;

std::string dims(Index r, Index c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

template <typename S>
void softmax_rows(Matrix<S>& m) {
  for (Index r = 0; r < m.rows(); ++r) {
    const S mx = m.row(r).maxCoeff();
    m.row(r) = (m.row(r).array() - mx).exp();
    m.row(r) /= m.row(r).sum();
  }
}

}  // namespace

template <typename S>
S gelu(S x) {
  const S u = S(kSqrt2OverPi) * (x + S(kGeluCubic) * x * x * x);
  return S(0.5) * x * (S(1) + std::tanh(u));
}

template <typename S>
S gelu_grad(S x) {
  const S u = S(kSqrt2OverPi) * (x + S(kGeluCubic) * x * x * x);
  const S th = std::tanh(u);
  const S du = S(kSqrt2OverPi) * (S(1) + S(3 * kGeluCubic) * x * x);
  return S(0.5) * (S(1) + th) + S(0.5) * x * (S(1) - th * th) * du;
}

template <typename S>
S sigmoid(S x) {
  if (x >= S(0)) return S(1) / (S(1) + std::exp(-x));
  const S e = std::exp(x);
  return e / (S(1) + e);
}

template <typename S>
Matrix<S> apply_activation(const Matrix<S>& z, Activation act) {
  switch (act) {
    case Activation::kIdentity:
      return z;
    case Activation::kGelu:
      return z.unaryExpr([](S v) { return gelu(v); });
    case Activation::kSigmoid:
      return z.unaryExpr([](S v) { return sigmoid(v); });
  }
  return z;
}

template <typename S>
Matrix<S> dense_forward(const Matrix<S>& x, const Matrix<S>& w, const Matrix<S>& b,
                        Activation act) {
  if (x.cols() != w.rows() || b.rows() != 1 || b.cols() != w.cols()) {
    throw ShapeError("dense: x " + dims(x.rows(), x.cols()) + ", W " + dims(w.rows(), w.cols()) +
                     ", b " + dims(b.rows(), b.cols()));
  }
  Matrix<S> z = x * w;
  z.rowwise() += b.row(0);
  return apply_activation(z, act);
}

template <typename S>
Matrix<S> layer_norm(const Matrix<S>& x, const Matrix<S>& gamma, const Matrix<S>& beta) {
  const Index d = x.cols();
  if (gamma.size() != d || beta.size() != d) throw ShapeError("layer_norm: gamma/beta width");
  if (d < 2) throw ShapeError("layer_norm needs at least 2 features");
  Matrix<S> y(x.rows(), d);
  for (Index r = 0; r < x.rows(); ++r) {
    const S mean = x.row(r).mean();
    const auto centred = (x.row(r).array() - mean).matrix();
    const S var = centred.squaredNorm() / S(d);
    const S inv = S(1) / std::sqrt(var + S(kLayerNormEps));
    y.row(r) = (centred.array() * inv * gamma.array().reshaped(1, d) + beta.array().reshaped(1, d))
                   .matrix();
  }
  return y;
}

template <typename S>
Matrix<S> lstm_forward_batched(const Matrix<S>& x, const LstmWeights<S>& w, SeqLayout layout,
                               Direction dir, LstmCache<S>* cache) {
  const Index h = w.hidden();
  if (w.w_ih->cols() != 4 * h || w.w_hh->cols() != 4 * h || w.bias->size() != 4 * h) {
    throw ShapeError("lstm: weights inconsistent with hidden size " + std::to_string(h));
  }
  if (x.cols() != w.w_ih->rows() || x.rows() != layout.rows()) {
    throw ShapeError("lstm: input " + dims(x.rows(), x.cols()) + " vs W_ih " +
                     dims(w.w_ih->rows(), w.w_ih->cols()) + " and layout " +
                     dims(layout.batch, layout.steps));
  }
  const Index batch = layout.batch;
  const Index steps = layout.steps;

  Matrix<S> xg = x * *w.w_ih;
  xg.rowwise() += w.bias->row(0);

  Matrix<S> out(x.rows(), h);
  Matrix<S> hid = Matrix<S>::Zero(batch, h);
  Matrix<S> cell = Matrix<S>::Zero(batch, h);
  Matrix<S> gates(batch, 4 * h);
  if (cache != nullptr) {
    cache->gates.assign(steps, {});
    cache->cell.assign(steps, {});
    cache->tanh_cell.assign(steps, {});
    cache->hidden.assign(steps, {});
  }
  for (Index s = 0; s < steps; ++s) {
    const Index t = dir == Direction::kForward ? s : steps - 1 - s;
    gates.noalias() = hid * *w.w_hh;
    for (Index b = 0; b < batch; ++b) gates.row(b) += xg.row(b * steps + t);
    auto sig = [](S v) { return sigmoid(v); };
    gates.leftCols(2 * h) = gates.leftCols(2 * h).unaryExpr(sig);
    gates.middleCols(2 * h, h) = gates.middleCols(2 * h, h).array().tanh().matrix();
    gates.rightCols(h) = gates.rightCols(h).unaryExpr(sig);
    cell = (gates.middleCols(h, h).array() * cell.array() +
            gates.leftCols(h).array() * gates.middleCols(2 * h, h).array())
               .matrix();
    Matrix<S> tc = cell.array().tanh().matrix();
    hid = (gates.rightCols(h).array() * tc.array()).matrix();
    for (Index b = 0; b < batch; ++b) out.row(b * steps + t) = hid.row(b);
    if (cache != nullptr) {
      cache->gates[s] = gates;
      cache->cell[s] = cell;
      cache->tanh_cell[s] = std::move(tc);
      cache->hidden[s] = hid;
    }
  }
  return out;
}

template <typename S>
Matrix<S> lstm_forward(const Matrix<S>& x, const LstmWeights<S>& w, Direction dir) {
  return lstm_forward_batched(x, w, SeqLayout{1, x.rows()}, dir, static_cast<LstmCache<S>*>(nullptr));
}

template <typename S>
Matrix<S> attention_forward_batched(const Matrix<S>& q, const Matrix<S>& k, const Matrix<S>& v,
                                    const AttentionWeights<S>& w, int n_heads, SeqLayout q_layout,
                                    SeqLayout kv_layout, AttentionCache<S>* cache) {
  const Index d = w.wq->rows();
  if (n_heads < 1 || d % n_heads != 0) {
    throw InvalidConfig("attention: width " + std::to_string(d) + " not divisible by " +
                        std::to_string(n_heads) + " heads");
  }
  if (q.cols() != d || k.cols() != d || v.cols() != d || k.rows() != v.rows() ||
      q.rows() != q_layout.rows() || k.rows() != kv_layout.rows() ||
      q_layout.batch != kv_layout.batch) {
    throw ShapeError("attention: q " + dims(q.rows(), q.cols()) + ", k " +
                     dims(k.rows(), k.cols()) + ", v " + dims(v.rows(), v.cols()) +
                     " inconsistent with width " + std::to_string(d));
  }
  const Index dh = d / n_heads;
  const S scale = S(1) / std::sqrt(S(dh));

  Matrix<S> qp = q * *w.wq;
  qp.rowwise() += w.bq->row(0);
  Matrix<S> kp = k * *w.wk;
  kp.rowwise() += w.bk->row(0);
  Matrix<S> vp = v * *w.wv;
  vp.rowwise() += w.bv->row(0);

  Matrix<S> heads(q.rows(), d);
  if (cache != nullptr) cache->probs.clear();
  for (Index b = 0; b < q_layout.batch; ++b) {
    const Index q0 = b * q_layout.steps;
    const Index k0 = b * kv_layout.steps;
    for (int hd = 0; hd < n_heads; ++hd) {
      const auto qh = qp.block(q0, hd * dh, q_layout.steps, dh);
      const auto kh = kp.block(k0, hd * dh, kv_layout.steps, dh);
      const auto vh = vp.block(k0, hd * dh, kv_layout.steps, dh);
      Matrix<S> probs = (qh * kh.transpose()) * scale;
      softmax_rows(probs);
      heads.block(q0, hd * dh, q_layout.steps, dh).noalias() = probs * vh;
      if (cache != nullptr) cache->probs.push_back(std::move(probs));
    }
  }
  Matrix<S> out = heads * *w.wo;
  out.rowwise() += w.bo->row(0);
  if (cache != nullptr) {
    cache->q = std::move(qp);
    cache->k = std::move(kp);
    cache->v = std::move(vp);
    cache->heads = std::move(heads);
  }
  return out;
}

template <typename S>
Matrix<S> multihead_attention(const Matrix<S>& q, const Matrix<S>& k, const Matrix<S>& v,
                              const AttentionWeights<S>& w, int n_heads) {
  return attention_forward_batched(q, k, v, w, n_heads, SeqLayout{1, q.rows()},
                                   SeqLayout{1, k.rows()}, static_cast<AttentionCache<S>*>(nullptr));
}

template <typename S>
S bce_loss(const Matrix<S>& p, const Matrix<S>& y) {
  if (p.size() != y.size()) {
    throw ShapeError("bce: " + std::to_string(p.size()) + " scores vs " +
                     std::to_string(y.size()) + " targets");
  }
  if (p.size() == 0) throw ShapeError("bce: empty input");
  const S lo = S(kBceClamp);
  const S hi = S(1) - S(kBceClamp);
  S total = 0;
  for (Index i = 0; i < p.size(); ++i) {
    const S pi = std::clamp(p.data()[i], lo, hi);
    const S yi = y.data()[i];
    total += yi * std::log(pi) + (S(1) - yi) * std::log(S(1) - pi);
  }
  return -total / S(p.size());
}

#define FVAD_INSTANTIATE(S)                                                                      \
  template S gelu<S>(S);                                                                         \
  template S gelu_grad<S>(S);                                                                    \
  template S sigmoid<S>(S);                                                                      \
  template Matrix<S> apply_activation<S>(const Matrix<S>&, Activation);                          \
  template Matrix<S> dense_forward<S>(const Matrix<S>&, const Matrix<S>&, const Matrix<S>&,      \
                                      Activation);                                               \
  template Matrix<S> layer_norm<S>(const Matrix<S>&, const Matrix<S>&, const Matrix<S>&);        \
  template Matrix<S> lstm_forward_batched<S>(const Matrix<S>&, const LstmWeights<S>&, SeqLayout, \
                                             Direction, LstmCache<S>*);                          \
  template Matrix<S> lstm_forward<S>(const Matrix<S>&, const LstmWeights<S>&, Direction);        \
  template Matrix<S> attention_forward_batched<S>(                                               \
      const Matrix<S>&, const Matrix<S>&, const Matrix<S>&, const AttentionWeights<S>&, int,     \
      SeqLayout, SeqLayout, AttentionCache<S>*);                                                 \
  template Matrix<S> multihead_attention<S>(const Matrix<S>&, const Matrix<S>&,                  \
                                            const Matrix<S>&, const AttentionWeights<S>&, int);  \
  template S bce_loss<S>(const Matrix<S>&, const Matrix<S>&);

FVAD_INSTANTIATE(float)
FVAD_INSTANTIATE(double)

#undef FVAD_INSTANTIATE

}  // namespace fvad::nn
