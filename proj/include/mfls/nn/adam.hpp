#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace mfls::nn {

struct AdamHyper {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam in the folded form
///   lr_t = lr * sqrt(1 - beta2^t) / (1 - beta1^t),  theta -= lr_t * m / (sqrt(v) + epsilon),
/// so that epsilon acts on the uncorrected second moment.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;
  AdamHyper hyper;

  AdamState() = default;
  AdamState(std::size_t n, AdamHyper h) : m(n, 0.0), v(n, 0.0), hyper(h) {}
};

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

}  // namespace mfls::nn
