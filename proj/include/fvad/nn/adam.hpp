#pragma once

#include "fvad/nn/tensor.hpp"

namespace fvad::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

// One bias-corrected Adam update of every parameter; increments the store's
// step counter once. Throws ShapeError if grads are not aligned with params.
template <typename S>
void adam_step(ParamStore<S>& params, const Grads<S>& grads, const AdamConfig& cfg);

}  // namespace fvad::nn
