#include "fvad/nn/graph.hpp"

#include <algorithm>
#include <memory>

namespace fvad::nn {

template <typename S>
typename Graph<S>::Var Graph<S>::push(Mat value, bool needs_grad) {
  if (backward_done_) throw StateError("graph already back-propagated; build a new one");
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

template <typename S>
void Graph<S>::check(Var v) const {
  if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw StateError("variable does not belong to this graph");
  }
}

template <typename S>
typename Graph<S>::Mat& Graph<S>::grad_ref(Var v) {
  Node& n = nodes_[v.id];
  if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

template <typename S>
void Graph<S>::accumulate(Var v, const Mat& g) {
  if (!nodes_[v.id].needs_grad) return;
  grad_ref(v) += g;
}

template <typename S>
typename Graph<S>::Mat Graph<S>::grad(Var v) const {
  check(v);
  const Node& n = nodes_[v.id];
  if (n.grad.size() == 0) return Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

template <typename S>
typename Graph<S>::Var Graph<S>::input(Mat value) {
  return push(std::move(value), false);
}

template <typename S>
typename Graph<S>::Var Graph<S>::param(std::string_view name) {
  if (params_ == nullptr) throw StateError("graph has no parameter store bound");
  const std::size_t idx = params_->index_of(name);
  Var v = push(params_->entry(idx).value, track_grads_);
  nodes_[v.id].param_index = static_cast<int>(idx);
  return v;
}

template <typename S>
typename Graph<S>::Var Graph<S>::activation(Var x, Activation act) {
  check(x);
  Var out = push(apply_activation(value(x), act), needs(x));
  if (!needs(x) || act == Activation::kIdentity) {
    if (needs(x)) nodes_[out.id].backprop = [this, x, out] { accumulate(x, nodes_[out.id].grad); };
    return out;
  }
  nodes_[out.id].backprop = [this, x, out, act] {
    const Mat& g = nodes_[out.id].grad;
    const Mat& in = nodes_[x.id].value;
    const Mat& y = nodes_[out.id].value;
    Mat d;
    if (act == Activation::kGelu) {
      d = g.cwiseProduct(in.unaryExpr([](S v) { return gelu_grad(v); }));
    } else {
      d = (g.array() * y.array() * (S(1) - y.array())).matrix();
    }
    accumulate(x, d);
  };
  return out;
}

template <typename S>
typename Graph<S>::Var Graph<S>::dense(Var x, Var w, Var b, Activation act) {
  check(x);
  check(w);
  check(b);
  Mat z = dense_forward(value(x), value(w), value(b), Activation::kIdentity);
  const bool ng = needs(x) || needs(w) || needs(b);
  Var lin = push(std::move(z), ng);
  if (ng) {
    nodes_[lin.id].backprop = [this, x, w, b, lin] {
      const Mat& g = nodes_[lin.id].grad;
      if (needs(w)) grad_ref(w).noalias() += nodes_[x.id].value.transpose() * g;
      if (needs(b)) grad_ref(b) += g.colwise().sum();
      if (needs(x)) grad_ref(x).noalias() += g * nodes_[w.id].value.transpose();
    };
  }
  if (act == Activation::kIdentity) return lin;
  return activation(lin, act);
}

template <typename S>
typename Graph<S>::Var Graph<S>::add(Var a, Var b) {
  check(a);
  check(b);
  if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols()) {
    throw ShapeError("add: operand shapes differ");
  }
  Var out = push(value(a) + value(b), needs(a) || needs(b));
  if (needs(out)) {
    nodes_[out.id].backprop = [this, a, b, out] {
      accumulate(a, nodes_[out.id].grad);
      accumulate(b, nodes_[out.id].grad);
    };
  }
  return out;
}

template <typename S>
typename Graph<S>::Var Graph<S>::concat_cols(Var a, Var b) {
  check(a);
  check(b);
  const Mat& va = value(a);
  const Mat& vb = value(b);
  if (va.rows() != vb.rows()) throw ShapeError("concat: row counts differ");
  Mat c(va.rows(), va.cols() + vb.cols());
  c << va, vb;
  const Index ca = va.cols();
  Var out = push(std::move(c), needs(a) || needs(b));
  if (needs(out)) {
    nodes_[out.id].backprop = [this, a, b, out, ca] {
      const Mat& g = nodes_[out.id].grad;
      if (needs(a)) grad_ref(a) += g.leftCols(ca);
      if (needs(b)) grad_ref(b) += g.rightCols(g.cols() - ca);
    };
  }
  return out;
}

template <typename S>
typename Graph<S>::Var Graph<S>::layer_norm(Var x, Var gamma, Var beta) {
  check(x);
  check(gamma);
  check(beta);
  Var out = push(nn::layer_norm(value(x), value(gamma), value(beta)),
                 needs(x) || needs(gamma) || needs(beta));
  if (!needs(out)) return out;
  nodes_[out.id].backprop = [this, x, gamma, beta, out] {
    const Mat& g = nodes_[out.id].grad;
    const Mat& in = nodes_[x.id].value;
    const auto gam = nodes_[gamma.id].value.row(0);
    const Index d = in.cols();
    Mat dx(in.rows(), d);
    Mat dgamma = Mat::Zero(1, d);
    for (Index r = 0; r < in.rows(); ++r) {
      const S mean = in.row(r).mean();
      const auto centred = (in.row(r).array() - mean).matrix();
      const S inv = S(1) / std::sqrt(centred.squaredNorm() / S(d) + S(kLayerNormEps));
      const auto xhat = (centred * inv).eval();
      dgamma += g.row(r).cwiseProduct(xhat);
      const auto dxhat = g.row(r).cwiseProduct(gam).eval();
      const S m1 = dxhat.mean();
      const S m2 = dxhat.cwiseProduct(xhat).mean();
      dx.row(r) = ((dxhat.array() - m1 - xhat.array() * m2) * inv).matrix();
    }
    if (needs(gamma)) grad_ref(gamma) += dgamma;
    if (needs(beta)) grad_ref(beta) += g.colwise().sum();
    accumulate(x, dx);
  };
  return out;
}

template <typename S>
typename Graph<S>::Var Graph<S>::lstm(Var x, const LstmVars& w, SeqLayout layout, Direction dir) {
  check(x);
  check(w.w_ih);
  check(w.w_hh);
  check(w.bias);
  auto cache = std::make_shared<LstmCache<S>>();
  const LstmWeights<S> weights{&value(w.w_ih), &value(w.w_hh), &value(w.bias)};
  Mat y = lstm_forward_batched(value(x), weights, layout, dir, cache.get());
  const bool ng = needs(x) || needs(w.w_ih) || needs(w.w_hh) || needs(w.bias);
  Var out = push(std::move(y), ng);
  if (!ng) return out;

  nodes_[out.id].backprop = [this, x, w, out, layout, dir, cache] {
    const Mat& g = nodes_[out.id].grad;
    const Mat& w_hh = nodes_[w.w_hh.id].value;
    const Index h = w_hh.rows();
    const Index batch = layout.batch;
    const Index steps = layout.steps;

    Mat d_xg(layout.rows(), 4 * h);
    Mat d_whh = Mat::Zero(h, 4 * h);
    Mat dh_next = Mat::Zero(batch, h);
    Mat dc_next = Mat::Zero(batch, h);
    Mat dh(batch, h);
    Mat dgates(batch, 4 * h);
    const Mat zeros = Mat::Zero(batch, h);

    for (Index s = steps - 1; s >= 0; --s) {
      const Index t = dir == Direction::kForward ? s : steps - 1 - s;
      for (Index b = 0; b < batch; ++b) dh.row(b) = g.row(b * steps + t) + dh_next.row(b);
      const Mat& gates = cache->gates[s];
      const Mat& tc = cache->tanh_cell[s];
      const Mat& c_prev = s > 0 ? cache->cell[s - 1] : zeros;
      const Mat& h_prev = s > 0 ? cache->hidden[s - 1] : zeros;
      const auto ig = gates.leftCols(h).array();
      const auto fg = gates.middleCols(h, h).array();
      const auto cg = gates.middleCols(2 * h, h).array();
      const auto og = gates.rightCols(h).array();

      const Mat dc =
          (dh.array() * og * (S(1) - tc.array().square()) + dc_next.array()).matrix();
      dgates.leftCols(h) = (dc.array() * cg * ig * (S(1) - ig)).matrix();
      dgates.middleCols(h, h) = (dc.array() * c_prev.array() * fg * (S(1) - fg)).matrix();
      dgates.middleCols(2 * h, h) = (dc.array() * ig * (S(1) - cg.square())).matrix();
      dgates.rightCols(h) = (dh.array() * tc.array() * og * (S(1) - og)).matrix();

      d_whh.noalias() += h_prev.transpose() * dgates;
      dh_next.noalias() = dgates * w_hh.transpose();
      dc_next = (dc.array() * fg).matrix();
      for (Index b = 0; b < batch; ++b) d_xg.row(b * steps + t) = dgates.row(b);
    }
    if (needs(w.w_hh)) grad_ref(w.w_hh) += d_whh;
    if (needs(w.w_ih)) grad_ref(w.w_ih).noalias() += nodes_[x.id].value.transpose() * d_xg;
    if (needs(w.bias)) grad_ref(w.bias) += d_xg.colwise().sum();
    if (needs(x)) grad_ref(x).noalias() += d_xg * nodes_[w.w_ih.id].value.transpose();
  };
  return out;
}

template <typename S>
typename Graph<S>::Var Graph<S>::attention(Var q, Var k, Var v, const AttentionVars& w,
                                           int n_heads, SeqLayout q_layout, SeqLayout kv_layout) {
  for (Var var : {q, k, v, w.wq, w.bq, w.wk, w.bk, w.wv, w.bv, w.wo, w.bo}) check(var);
  auto cache = std::make_shared<AttentionCache<S>>();
  const AttentionWeights<S> weights{&value(w.wq), &value(w.bq), &value(w.wk), &value(w.bk),
                                    &value(w.wv), &value(w.bv), &value(w.wo), &value(w.bo)};
  Mat y = attention_forward_batched(value(q), value(k), value(v), weights, n_heads, q_layout,
                                    kv_layout, cache.get());
  bool ng = false;
  for (Var var : {q, k, v, w.wq, w.bq, w.wk, w.bk, w.wv, w.bv, w.wo, w.bo}) ng = ng || needs(var);
  Var out = push(std::move(y), ng);
  if (!ng) return out;

  nodes_[out.id].backprop = [this, q, k, v, w, out, n_heads, q_layout, kv_layout, cache] {
    const Mat& g = nodes_[out.id].grad;
    const Index d = cache->q.cols();
    const Index dh = d / n_heads;
    const S scale = S(1) / std::sqrt(S(dh));

    if (needs(w.wo)) grad_ref(w.wo).noalias() += cache->heads.transpose() * g;
    if (needs(w.bo)) grad_ref(w.bo) += g.colwise().sum();
    const Mat d_heads = g * nodes_[w.wo.id].value.transpose();

    Mat dq = Mat::Zero(cache->q.rows(), d);
    Mat dk = Mat::Zero(cache->k.rows(), d);
    Mat dv = Mat::Zero(cache->v.rows(), d);
    for (Index b = 0; b < q_layout.batch; ++b) {
      const Index q0 = b * q_layout.steps;
      const Index k0 = b * kv_layout.steps;
      for (int hd = 0; hd < n_heads; ++hd) {
        const Mat& probs = cache->probs[b * n_heads + hd];
        const auto do_h = d_heads.block(q0, hd * dh, q_layout.steps, dh);
        const auto qh = cache->q.block(q0, hd * dh, q_layout.steps, dh);
        const auto kh = cache->k.block(k0, hd * dh, kv_layout.steps, dh);
        const auto vh = cache->v.block(k0, hd * dh, kv_layout.steps, dh);
        const Mat dprobs = do_h * vh.transpose();
        dv.block(k0, hd * dh, kv_layout.steps, dh).noalias() += probs.transpose() * do_h;
        Mat dscores = probs.cwiseProduct(dprobs);
        const Eigen::Matrix<S, Eigen::Dynamic, 1> row_dot = dscores.rowwise().sum();
        dscores -= (probs.array().colwise() * row_dot.array()).matrix();
        dscores *= scale;
        dq.block(q0, hd * dh, q_layout.steps, dh).noalias() += dscores * kh;
        dk.block(k0, hd * dh, kv_layout.steps, dh).noalias() += dscores.transpose() * qh;
      }
    }
    auto project_back = [this](Var in, Var wt, Var bias, const Mat& dproj) {
      if (needs(wt)) grad_ref(wt).noalias() += nodes_[in.id].value.transpose() * dproj;
      if (needs(bias)) grad_ref(bias) += dproj.colwise().sum();
      if (needs(in)) grad_ref(in).noalias() += dproj * nodes_[wt.id].value.transpose();
    };
    project_back(q, w.wq, w.bq, dq);
    project_back(k, w.wk, w.bk, dk);
    project_back(v, w.wv, w.bv, dv);
  };
  return out;
}

template <typename S>
typename Graph<S>::Var Graph<S>::bce(Var p, const Mat& targets) {
  check(p);
  const S loss = bce_loss(value(p), targets);
  Mat lv(1, 1);
  lv(0, 0) = loss;
  Var out = push(std::move(lv), needs(p));
  if (!needs(out)) return out;
  nodes_[out.id].backprop = [this, p, out, targets] {
    const S upstream = nodes_[out.id].grad(0, 0);
    const Mat& pv = nodes_[p.id].value;
    const S n = S(pv.size());
    const S lo = S(kBceClamp);
    const S hi = S(1) - S(kBceClamp);
    Mat d(pv.rows(), pv.cols());
    for (Index i = 0; i < pv.size(); ++i) {
      const S pi = pv.data()[i];
      const S yi = targets.data()[i];
      // Clamped predictions pass no gradient.
      d.data()[i] = (pi <= lo || pi >= hi)
                        ? S(0)
                        : -upstream * (yi / pi - (S(1) - yi) / (S(1) - pi)) / n;
    }
    accumulate(p, d);
  };
  return out;
}

template <typename S>
void Graph<S>::backward(Var loss) {
  if (nodes_.empty()) throw StateError("backward called before any forward pass");
  check(loss);
  if (backward_done_) throw StateError("backward already ran on this graph");
  const Node& ln = nodes_[loss.id];
  if (ln.value.size() != 1) throw StateError("backward needs a scalar loss");
  backward_done_ = true;
  if (!ln.needs_grad) return;
  grad_ref(loss).setConstant(S(1));
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.backprop && n.grad.size() != 0) n.backprop();
  }
}

template <typename S>
Grads<S> Graph<S>::param_grads() const {
  if (params_ == nullptr) throw StateError("graph has no parameter store bound");
  if (!backward_done_) throw StateError("param_grads requested before backward");
  Grads<S> out = zero_grads(*params_);
  for (const Node& n : nodes_) {
    if (n.param_index >= 0 && n.grad.size() != 0) out[n.param_index] += n.grad;
  }
  return out;
}

template class Graph<float>;
template class Graph<double>;

}  // namespace fvad::nn
