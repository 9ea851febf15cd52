#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mfls/constraints/constraint.hpp"
#include "mfls/dynamics/model.hpp"
#include "mfls/util/rng.hpp"

namespace mfls::dynamics {

enum class Sense { minimize, maximize };

/// Uniform grid t_k = k T / N_T.
struct TimeGrid {
  double horizon = 1.0;
  std::size_t steps = 1;

  TimeGrid() = default;
  TimeGrid(double T, std::size_t n);
  double dt() const { return horizon / static_cast<double>(steps); }
  double time(std::size_t k) const { return horizon * static_cast<double>(k) / static_cast<double>(steps); }
  StepContext context(std::size_t k) const { return {k, time(k), dt()}; }
};

/// Draws one initial state into `x` (size d).
using InitialSampler = std::function<void(Engine&, std::span<double> x)>;

struct ProblemSpec {
  std::string name;
  std::shared_ptr<const Dynamics> dynamics;
  double horizon = 1.0;
  std::size_t steps = 50;
  InitialSampler initial;
  /// Psi = max_l Psi_l, evaluated at t_1, ..., t_{N_T}.
  std::vector<constraints::ConstraintSpec> constraints;
  /// Terminal constraint phi(mu_T) <= 0.
  std::optional<constraints::ConstraintSpec> terminal_constraint;
  Sense sense = Sense::minimize;
  /// Control box; empty means unbounded controls.
  std::vector<double> control_lo, control_hi;
  /// Fixed input standardization of the state coordinates.
  std::vector<double> state_center, state_scale;
  /// Optional deterministic baseline command (steps x q, row-major) used as a
  /// control variate for the running cost under common noise.
  std::vector<double> baseline_control;

  ModelDims dims() const { return dynamics->dims(); }
  TimeGrid grid() const { return {horizon, steps}; }
  double sign() const { return sense == Sense::minimize ? 1.0 : -1.0; }
  /// Throws ConfigError when the spec is not usable.
  void validate() const;
};

}  // namespace mfls::dynamics
