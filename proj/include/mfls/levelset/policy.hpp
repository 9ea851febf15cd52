#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mfls/dynamics/problem.hpp"
#include "mfls/dynamics/simulate.hpp"
#include "mfls/nn/network.hpp"

namespace mfls::levelset {

struct Architecture {
  std::vector<std::size_t> hidden{15, 15};
  nn::Activation activation = nn::Activation::tanh;
};

/// One control network per time step, inputs (x, Z[, W0]); with common noise
/// also one martingale network per step, inputs (Z, W0), p outputs.
struct PolicySet {
  std::vector<nn::PolicyNetwork> alpha;
  std::vector<nn::PolicyNetwork> beta;

  bool common() const noexcept { return !beta.empty(); }
  std::size_t steps() const noexcept { return alpha.size(); }
  std::size_t parameter_count() const;
  std::size_t alpha_offset(std::size_t step) const;
  std::size_t beta_offset(std::size_t step) const;
  std::vector<double> flatten() const;
  void unflatten(std::span<const double> flat);

  /// Networks for `spec`, initialized uniformly from `seed` (stream "init").
  static PolicySet build(const dynamics::ProblemSpec& spec, const Architecture& arch, bool common,
                         std::uint64_t seed);

  /// The same control with W0 inputs appended to every alpha network (zero
  /// weights) and identically-zero beta networks: a common-noise policy that
  /// acts exactly like this one.
  PolicySet with_zero_common(std::size_t p, const Architecture& beta_arch) const;

  /// Input standardization of the Z coordinate (and W0 by sqrt(t)).
  void set_z_normalization(std::span<const double> offset, std::span<const double> scale,
                           const dynamics::TimeGrid& grid, std::size_t state_dim);
};

/// Evaluates the networks one input at a time (reference path).
class NetworkLaw final : public dynamics::ControlLaw {
 public:
  explicit NetworkLaw(const PolicySet& set) : set_(&set) {}
  void control(std::size_t step, double t, std::span<const double> x, double z,
               std::span<const double> w0, std::span<double> a) const override;
  void martingale(std::size_t step, double z, std::span<const double> w0,
                  std::span<double> beta) const override;

 private:
  const PolicySet* set_;
};

}  // namespace mfls::levelset
