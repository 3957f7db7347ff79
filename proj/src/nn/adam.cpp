#include "fvad/nn/adam.hpp"

#include <cmath>

namespace fvad::nn {

void AdamConfig::validate() const {
  if (!(lr > 0.0)) throw InvalidConfig("adam: lr must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw InvalidConfig("adam: beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw InvalidConfig("adam: beta2 must be in [0, 1)");
  if (!(eps > 0.0)) throw InvalidConfig("adam: eps must be positive");
}

template <typename S>
void adam_step(ParamStore<S>& params, const Grads<S>& grads, const AdamConfig& cfg) {
  cfg.validate();
  if (grads.size() != params.size()) {
    throw ShapeError("adam: " + std::to_string(grads.size()) + " gradients for " +
                     std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& e = params.entry(i);
    if (grads[i].rows() != e.value.rows() || grads[i].cols() != e.value.cols()) {
      throw ShapeError("adam: gradient shape mismatch for " + e.name);
    }
  }
  const std::int64_t step = params.adam_steps() + 1;
  params.set_adam_steps(step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  const S step_size = static_cast<S>(cfg.lr / bc1);
  const S inv_sqrt_bc2 = static_cast<S>(1.0 / std::sqrt(bc2));
  const S b1 = static_cast<S>(cfg.beta1);
  const S b2 = static_cast<S>(cfg.beta2);
  const S eps = static_cast<S>(cfg.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& e = params.entry(i);
    const auto g = grads[i].array();
    e.adam_m = (b1 * e.adam_m.array() + (S(1) - b1) * g).matrix();
    e.adam_v = (b2 * e.adam_v.array() + (S(1) - b2) * g.square()).matrix();
    e.value.array() -=
        step_size * e.adam_m.array() / (e.adam_v.array().sqrt() * inv_sqrt_bc2 + eps);
  }
}

template void adam_step<float>(ParamStore<float>&, const Grads<float>&, const AdamConfig&);
template void adam_step<double>(ParamStore<double>&, const Grads<double>&, const AdamConfig&);

}  // namespace fvad::nn
