#pragma once

#include "fvad/nn/kernels.hpp"
#include "fvad/nn/tensor.hpp"

#include <functional>
#include <string_view>
#include <vector>

namespace fvad::nn {

// Reverse-mode tape. Every op evaluates eagerly and records a closure that
// propagates the output gradient to its inputs; backward() replays the
// closures in reverse creation order.
template <typename S>
class Graph {
 public:
  using Mat = Matrix<S>;

  struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
  };

  // Parameters are read from `params`, which must outlive the graph.
  // With track_grads == false parameters are recorded as constants, so no
  // backward state is kept (inference).
  explicit Graph(const ParamStore<S>* params = nullptr, bool track_grads = true)
      : params_(params), track_grads_(track_grads) {}

  Var input(Mat value);
  Var param(std::string_view name);

  const Mat& value(Var v) const { return nodes_.at(v.id).value; }
  // Gradient of the last backward() with respect to v (zeros if v did not
  // influence the loss).
  Mat grad(Var v) const;
  std::size_t node_count() const { return nodes_.size(); }

  Var dense(Var x, Var w, Var b, Activation act);
  Var activation(Var x, Activation act);
  Var add(Var a, Var b);
  Var concat_cols(Var a, Var b);
  Var layer_norm(Var x, Var gamma, Var beta);

  struct LstmVars {
    Var w_ih, w_hh, bias;
  };
  Var lstm(Var x, const LstmVars& w, SeqLayout layout, Direction dir);

  struct AttentionVars {
    Var wq, bq, wk, bk, wv, bv, wo, bo;
  };
  Var attention(Var q, Var k, Var v, const AttentionVars& w, int n_heads, SeqLayout q_layout,
                SeqLayout kv_layout);

  // Scalar mean binary cross-entropy against fixed targets.
  Var bce(Var p, const Mat& targets);

  // Seeds d(loss)/d(loss) = 1 and back-propagates. Throws StateError if the
  // graph holds no forward pass, the var is not a scalar, or backward already ran.
  void backward(Var loss);

  // Gradients for every parameter of the bound store; untouched ones are zero.
  Grads<S> param_grads() const;

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool needs_grad = false;
    int param_index = -1;
    std::function<void()> backprop;
  };

  Var push(Mat value, bool needs_grad);
  bool needs(Var v) const { return nodes_[v.id].needs_grad; }
  Mat& grad_ref(Var v);
  void accumulate(Var v, const Mat& g);
  void check(Var v) const;

  const ParamStore<S>* params_;
  bool track_grads_ = true;
  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace fvad::nn
