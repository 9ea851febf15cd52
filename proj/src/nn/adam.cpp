#include "mfls/nn/adam.hpp"

#include <cmath>
#include <string>

#include "mfls/util/error.hpp"

namespace mfls::nn {

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state) {
  if (params.size() != grads.size() || state.m.size() != params.size() ||
      state.v.size() != params.size())
    throw DimensionError("adam: " + std::to_string(params.size()) + " parameters, " +
                         std::to_string(grads.size()) + " gradients, state of " +
                         std::to_string(state.m.size()));
  const auto& h = state.hyper;
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double lr_t = h.learning_rate * std::sqrt(1.0 - std::pow(h.beta2, t)) /
                      (1.0 - std::pow(h.beta1, t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double g = grads[k];
    state.m[k] = h.beta1 * state.m[k] + (1.0 - h.beta1) * g;
    state.v[k] = h.beta2 * state.v[k] + (1.0 - h.beta2) * g * g;
    params[k] -= lr_t * state.m[k] / (std::sqrt(state.v[k]) + h.epsilon);
  }
}

}  // namespace mfls::nn
