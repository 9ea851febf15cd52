#include "mfls/levelset/recover.hpp"

#include <algorithm>
#include <cmath>

#include "mfls/dynamics/noise.hpp"
#include "mfls/util/error.hpp"

namespace mfls::levelset {

RecoveredControl recover_control(const PolicySet& policies, std::optional<double> v0,
                                 const dynamics::ProblemSpec& spec) {
  if (!v0) throw UndefinedValueError("V0 is undefined: no grid point reached the zero level-set");
  return {policies, *v0, spec.sign() * *v0, spec.sense};
}

AuditResult audit_control(const dynamics::ProblemSpec& spec, const RecoveredControl& control,
                          std::size_t particles, std::size_t groups, std::uint64_t seed,
                          std::size_t keep_particles, bool parallel) {
  const auto plan = dynamics::NoisePlan::generate(spec, groups, particles, seed, "audit");
  EngineOptions o;
  o.common = control.policies.common();
  o.parallel = parallel;
  o.penalty.kind = constraints::PenaltyKind::supremum;
  const AuxiliaryEngine engine(spec, o);
  const std::vector<double> z(groups, control.internal_z);
  AuditResult a;
  a.particles = particles;
  a.groups = groups;
  a.trace.keep_particles = keep_particles;
  const auto res = engine.evaluate(control.policies, z, plan, &a.trace);

  const double sign = spec.sign(), G = static_cast<double>(groups);
  const std::size_t steps = spec.steps;
  double s = 0.0, s2 = 0.0;
  for (const auto& g : res.groups) {
    const double c = sign * (g.running + g.terminal);
    s += c;
    s2 += c * c;
    a.running += sign * g.running;
    a.terminal += sign * g.terminal;
    a.phi += g.phi;
    a.phi_max = std::max(a.phi_max, g.phi);
  }
  a.cost = s / G;
  a.running /= G;
  a.terminal /= G;
  a.phi /= G;
  a.cost_stderr = groups > 1 ? std::sqrt(std::max(0.0, (s2 - G * a.cost * a.cost) / (G - 1)) / G) : 0.0;

  a.psi_max.assign(steps + 1, -HUGE_VAL);
  a.psi_mean.assign(steps + 1, 0.0);
  double tsum = 0.0;
  for (std::size_t g = 0; g < groups; ++g)
    for (std::size_t i = 0; i <= steps; ++i) {
      const double v = a.trace.psi[g * (steps + 1) + i];
      a.psi_max[i] = std::max(a.psi_max[i], v);
      a.psi_mean[i] += v / G;
      if (i > 0) tsum += v;
    }
  a.psi_time_average = tsum / (G * static_cast<double>(steps));

  const std::size_t total = groups * particles;
  a.terminal_samples.assign(a.trace.terminal_states.begin(), a.trace.terminal_states.begin() + total);
  double m = 0.0;
  for (double x : a.terminal_samples) m += x;
  m /= static_cast<double>(total);
  double v = 0.0;
  for (double x : a.terminal_samples) v += (x - m) * (x - m);
  a.terminal_mean = m;
  a.terminal_variance = v / static_cast<double>(total);

  const std::size_t keep = a.trace.keep_particles, d = spec.dims().state;
  if (keep > 0) {
    a.step_mean.assign(steps + 1, 0.0);
    a.step_variance.assign(steps + 1, 0.0);
    for (std::size_t i = 0; i <= steps; ++i) {
      double sm = 0.0, sv = 0.0;
      for (std::size_t j = 0; j < keep; ++j) sm += a.trace.states[(i * keep + j) * d];
      sm /= static_cast<double>(keep);
      for (std::size_t j = 0; j < keep; ++j) {
        const double e = a.trace.states[(i * keep + j) * d] - sm;
        sv += e * e;
      }
      a.step_mean[i] = sm;
      a.step_variance[i] = sv / static_cast<double>(keep);
    }
  }
  return a;
}

}  // namespace mfls::levelset
