#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "mfls/dynamics/problem.hpp"
#include "mfls/levelset/engine.hpp"
#include "mfls/levelset/policy.hpp"

namespace mfls::levelset {

/// Policies with the auxiliary input pinned to the Z path started at V0:
/// a_i(x) = alpha_i(x, Z_i^{V0}).
struct RecoveredControl {
  PolicySet policies;
  double value = 0.0;     // V0, problem orientation
  double internal_z = 0.0;
  dynamics::Sense sense = dynamics::Sense::minimize;

  NetworkLaw law() const { return NetworkLaw(policies); }
};

/// Throws UndefinedValueError when V0 is empty.
RecoveredControl recover_control(const PolicySet& policies, std::optional<double> v0,
                                 const dynamics::ProblemSpec& spec);

struct AuditResult {
  std::size_t particles = 0, groups = 0;
  double cost = 0.0;         // problem sign, mean over groups
  double cost_stderr = 0.0;
  double running = 0.0;      // problem sign
  double terminal = 0.0;     // problem sign
  double phi = 0.0;          // mean over groups
  double phi_max = 0.0;
  std::vector<double> psi_max;   // per step 0..N_T, max over groups
  std::vector<double> psi_mean;  // per step, mean over groups
  double psi_time_average = 0.0; // mean over groups and steps 1..N_T
  double terminal_mean = 0.0;    // state coordinate 0, all particles
  double terminal_variance = 0.0;
  std::vector<double> step_mean, step_variance;  // coordinate 0 over kept particles
  std::vector<double> terminal_samples;          // coordinate 0, all particles
  EngineTrace trace;
};

/// Re-simulates the recovered control on the "audit" stream.
AuditResult audit_control(const dynamics::ProblemSpec& spec, const RecoveredControl& control,
                          std::size_t particles, std::size_t groups, std::uint64_t seed,
                          std::size_t keep_particles = 0, bool parallel = true);

}  // namespace mfls::levelset
