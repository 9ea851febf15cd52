#pragma once

// Law constraints Psi(t, mu) <= 0 on one coordinate of the state, and the
// penalty aggregators that turn per-step constraint values into loss terms.
// A value <= 0 means the constraint holds at (t, mu).

#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mfls::constraints {

enum class ConstraintKind {
  probability_of_set,     // p - mu([lo, hi])
  as_distance,            // int dist(x, [lo, hi]) mu(dx)
  wasserstein_ball,       // W2(mu, eta) - radius
  terminal_only,          // inner(mu) at t = T, 0 before
  discrete_times,         // inner(mu) at listed times, 0 elsewhere
  tail_conditional,       // (delta - E[X | X <= theta]) P(X <= theta)
  terminal_variance_cap,  // Var(mu) - cap
  squared_excursion,      // int (lo - x)_+^2 + (x - hi)_+^2 mu(dx)
  custom,
};

const char* to_string(ConstraintKind kind);
ConstraintKind constraint_kind_from_string(const std::string& name);

/// Fills `grad` (one entry per sample, already including the 1/N weight) and
/// returns the value.
using CustomConstraint =
    std::function<double(double t, std::span<const double> x, std::span<double> grad)>;

struct TimePoint {
  double t = 0.0;
  double horizon = 0.0;
  bool is_terminal() const;
};

struct ConstraintSpec {
  ConstraintKind kind = ConstraintKind::custom;
  std::size_t coordinate = 0;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  double level = 0.0;
  std::vector<double> benchmark;
  double radius = 0.0;
  double theta = 0.0;
  double delta = 0.0;
  double cap = 0.0;
  std::vector<double> times;
  std::shared_ptr<const ConstraintSpec> inner;
  CustomConstraint fn;
  double kappa = 0.0;

  static ConstraintSpec probability_of_set(double lo, double hi, double level, std::size_t coord = 0);
  static ConstraintSpec as_distance(double lo, double hi, std::size_t coord = 0);
  static ConstraintSpec wasserstein_ball(std::vector<double> benchmark, double radius,
                                         std::size_t coord = 0);
  static ConstraintSpec terminal_only(ConstraintSpec inner);
  static ConstraintSpec discrete_times(ConstraintSpec inner, std::vector<double> times);
  static ConstraintSpec tail(double theta, double delta, std::size_t coord = 0);
  static ConstraintSpec variance_cap(double cap, std::size_t coord = 0);
  static ConstraintSpec excursion(double lo, double hi, std::size_t coord = 0);
  static ConstraintSpec custom(CustomConstraint fn, std::size_t coord = 0);

  /// Throws ConfigError on inconsistent parameters.
  void validate() const;
  /// The state coordinate read by the (innermost) functional.
  std::size_t read_coordinate() const;
  /// True when the functional can be nonzero only at isolated times.
  bool is_pointwise_in_time() const;
};

/// Psi(t, mu) for the one-dimensional samples `x` of the constrained coordinate.
double evaluate(const ConstraintSpec& spec, const TimePoint& tp, std::span<const double> x);

/// Same value; `grad` receives d Psi / d x_j for every sample (size N). The
/// gradient is pathwise: indicator jumps contribute nothing.
double evaluate_with_gradient(const ConstraintSpec& spec, const TimePoint& tp,
                              std::span<const double> x, std::span<double> grad);

/// Psi_kappa = Psi - kappa * 1{Psi <= 0}; same feasible set, strictly negative on it.
ConstraintSpec kappa_modify(const ConstraintSpec& spec, double kappa);

enum class PenaltyKind { integral, supremum, terminal };

const char* to_string(PenaltyKind kind);
PenaltyKind penalty_kind_from_string(const std::string& name);

struct PenaltyMode {
  PenaltyKind kind = PenaltyKind::integral;
  double weight = 100.0;
};

/// Rejects weights <= 0 and time-pointwise constraints under integral aggregation.
void validate_penalty(const std::vector<ConstraintSpec>& specs, const PenaltyMode& mode);

/// integral:  L * sum_i (v_i)_+ dt + L * (phi)_+
/// supremum:  L * max_i (v_i)_+  + L * (phi)_+
/// terminal:  L * (phi)_+
double aggregate_penalty(std::span<const double> values, const PenaltyMode& mode, double dt,
                         std::optional<double> phi = std::nullopt);

/// Penalty and its partial derivatives with respect to each v_i and phi.
struct PenaltyGradient {
  double penalty = 0.0;
  std::vector<double> d_values;
  double d_phi = 0.0;
};
PenaltyGradient aggregate_penalty_gradient(std::span<const double> values,
                                           const PenaltyMode& mode, double dt,
                                           std::optional<double> phi = std::nullopt);

}  // namespace mfls::constraints
