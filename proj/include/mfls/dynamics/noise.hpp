#pragma once

// Pre-generated randomness for one batch: initial states, idiosyncratic
// increments for every particle and common increments for every group.
// Regenerating with the same (seed, stream, index) gives identical arrays.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mfls/dynamics/problem.hpp"

namespace mfls::dynamics {

struct NoisePlan {
  std::size_t steps = 0;
  std::size_t groups = 0;
  std::size_t particles = 0;  // per group
  std::size_t state_dim = 0;
  std::size_t noise_dim = 0;
  std::size_t common_dim = 0;
  double dt = 0.0;
  std::uint64_t seed = 0;
  std::string stream;
  std::uint64_t index = 0;

  /// x0[k * total + g * particles + j]
  std::vector<double> x0;
  /// dw[(i * noise_dim + k) * total + g * particles + j]
  std::vector<double> dw;
  /// dw0[(i * common_dim + k) * groups + g]
  std::vector<double> dw0;

  std::size_t total() const noexcept { return groups * particles; }
  const double* dw_at(std::size_t step, std::size_t k) const {
    return dw.data() + (step * noise_dim + k) * total();
  }
  double dw0_at(std::size_t step, std::size_t k, std::size_t g) const {
    return dw0[(step * common_dim + k) * groups + g];
  }
  /// W0 at t_step for group g (sum of earlier increments, left to right).
  double w0_at(std::size_t step, std::size_t k, std::size_t g) const;

  /// Particles are drawn in blocks of kNoiseBlock, each from its own engine
  /// seeded by derive_seed(seed, stream, {index, group, block}); common increments
  /// use the sub-stream stream + "/common" with indices {index, group}.
  static NoisePlan generate(const ProblemSpec& spec, std::size_t groups, std::size_t particles,
                            std::uint64_t seed, const std::string& stream, std::uint64_t index = 0);
};

inline constexpr std::size_t kNoiseBlock = 256;

}  // namespace mfls::dynamics
