#pragma once

// Lane-blocked evaluation of a PolicyNetwork. Inputs and outputs are stored
// structure-of-arrays: coordinate k of lane p lives at ptr[k * kLanes + p].
// The forward pass records what the backward pass needs in a caller-owned tape.

#include <cstddef>

#include "mfls/nn/network.hpp"

namespace mfls::nn {

inline constexpr std::size_t kLanes = 64;

class BatchEvaluator {
 public:
  explicit BatchEvaluator(const PolicyNetwork& net);

  const PolicyNetwork& network() const noexcept { return *net_; }
  std::size_t tape_size() const noexcept { return tape_size_; }

  /// Evaluates lanes [0, n). `x` holds raw (unnormalized) inputs.
  void forward(const double* x, std::size_t n, double* tape, double* out) const;

  /// Given d loss / d output in `dout`, accumulates the parameter gradient into
  /// `grad` (parameter_count entries) and, if `dx` is not null, writes
  /// d loss / d x for the raw inputs.
  void backward(const double* tape, std::size_t n, const double* dout, double* dx,
                double* grad) const;

 private:
  const PolicyNetwork* net_;
  std::size_t tape_size_ = 0;
  std::size_t max_width_ = 0;
};

}  // namespace mfls::nn
