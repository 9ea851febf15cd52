#include "mfls/dynamics/problem.hpp"

#include <cmath>

namespace mfls::dynamics {

TimeGrid::TimeGrid(double T, std::size_t n) : horizon(T), steps(n) {
  if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError("horizon must be positive and finite");
  if (n == 0) throw ConfigError("number of time steps must be at least 1");
}

void ProblemSpec::validate() const {
  if (!dynamics) throw ConfigError(name + ": no dynamics");
  if (!initial) throw ConfigError(name + ": no initial sampler");
  TimeGrid check(horizon, steps);
  (void)check;
  const auto d = dims();
  if (control_lo.size() != control_hi.size())
    throw ConfigError(name + ": control box bounds have different lengths");
  if (!control_lo.empty()) {
    if (control_lo.size() != d.control) throw ConfigError(name + ": control box has wrong dimension");
    for (std::size_t k = 0; k < d.control; ++k)
      if (!(control_lo[k] <= control_hi[k])) throw ConfigError(name + ": control box is empty");
  }
  if (!state_center.empty() && state_center.size() != d.state)
    throw ConfigError(name + ": state_center has wrong dimension");
  if (!state_scale.empty()) {
    if (state_scale.size() != d.state) throw ConfigError(name + ": state_scale has wrong dimension");
    for (double s : state_scale)
      if (!(s > 0.0)) throw ConfigError(name + ": state_scale entries must be positive");
  }
  for (const auto& c : constraints) {
    c.validate();
    if (c.read_coordinate() >= d.state) throw ConfigError(name + ": constraint reads a missing coordinate");
  }
  if (terminal_constraint) {
    terminal_constraint->validate();
    if (terminal_constraint->read_coordinate() >= d.state)
      throw ConfigError(name + ": terminal constraint reads a missing coordinate");
  }
  if (!baseline_control.empty() && baseline_control.size() != steps * d.control)
    throw ConfigError(name + ": baseline control must have steps x control entries");
}

}  // namespace mfls::dynamics
