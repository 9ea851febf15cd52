#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <vector>

#include "mfls/dynamics/problem.hpp"

namespace mfls::levelset {

/// z grid in the problem's own orientation (ascending) with the evaluated
/// auxiliary losses. For maximization problems the loss is reported as w-hat:
/// zero below the value, growing above it.
struct LevelSetCurve {
  std::vector<double> z;
  std::vector<double> w;
  std::vector<double> stderr_;
  double epsilon = 1e-8;
  dynamics::Sense sense = dynamics::Sense::minimize;
  std::optional<double> value;

  std::size_t size() const { return z.size(); }
  void validate() const;
  void write_csv(std::ostream& os) const;
};

/// Regular grid of `points` values over [lo, hi].
std::vector<double> regular_grid(double lo, double hi, std::size_t points);

/// minimize: smallest z with w <= eps; maximize: largest. Empty if none.
std::optional<double> extract_value(const LevelSetCurve& curve, double eps);

struct AffineFit {
  double root = 0.0;
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // root mean square of the fit residuals
  std::size_t first = 0, last = 0;  // fitted index range (inclusive) in curve order
};

/// Least-squares line through the strictly decreasing part of the curve (read
/// in the direction where w decreases) above `knee_fraction * max w`, and its
/// zero crossing. Throws UndefinedValueError with fewer than three such points.
AffineFit extract_value_affine(const LevelSetCurve& curve, double knee_fraction = 0.2);

}  // namespace mfls::levelset
