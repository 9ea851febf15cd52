#include "mfls/levelset/loss.hpp"

#include <algorithm>
#include <optional>

#include "mfls/dynamics/simulate.hpp"
#include "mfls/util/error.hpp"

namespace mfls::levelset {

GroupResult auxiliary_loss_group(const dynamics::ProblemSpec& spec, const PolicySet& policies,
                                 double z, const dynamics::NoisePlan& noise, std::size_t group,
                                 const constraints::PenaltyMode& penalty) {
  constraints::validate_penalty(spec.constraints, penalty);
  const NetworkLaw law(policies);
  const auto rec = dynamics::simulate(spec, law, z, noise, group);
  const double sign = spec.sign();
  GroupResult r;
  r.terminal = sign * rec.terminal_cost;
  r.z_final = rec.z_path.back();
  r.running = sign * rec.running_cost;
  r.phi = rec.phi;
  const std::span<const double> values(rec.psi.data() + 1, spec.steps);
  r.max_psi = *std::max_element(values.begin(), values.end());
  std::optional<double> phi;
  if (spec.terminal_constraint) phi = rec.phi;
  r.penalty = constraints::aggregate_penalty(spec.constraints.empty() ? std::span<const double>{} : values,
                                             penalty, rec.grid.dt(), phi);
  r.shortfall = std::max(0.0, r.terminal - r.z_final);
  r.loss = r.shortfall + r.penalty;
  return r;
}

namespace {

double mean_loss(double z, const PolicySet& policies, const dynamics::NoisePlan& noise,
                 const dynamics::ProblemSpec& spec, const constraints::PenaltyMode& penalty) {
  double s = 0.0;
  for (std::size_t g = 0; g < noise.groups; ++g)
    s += auxiliary_loss_group(spec, policies, z, noise, g, penalty).loss;
  return s / static_cast<double>(noise.groups);
}

}  // namespace

double auxiliary_loss(double z, const PolicySet& policies, const dynamics::NoisePlan& noise,
                      const dynamics::ProblemSpec& spec, const constraints::PenaltyMode& penalty) {
  if (policies.common()) throw ConfigError("auxiliary_loss takes policies without common-noise inputs");
  return mean_loss(z, policies, noise, spec, penalty);
}

double auxiliary_loss_common(double z, const PolicySet& policies, const dynamics::NoisePlan& noise,
                             const dynamics::ProblemSpec& spec,
                             const constraints::PenaltyMode& penalty) {
  if (!policies.common()) throw ConfigError("auxiliary_loss_common needs martingale networks");
  if (policies.beta.front().output_dim() != spec.dims().common)
    throw DimensionError("martingale networks must have one output per common noise coordinate");
  return mean_loss(z, policies, noise, spec, penalty);
}

}  // namespace mfls::levelset
