#pragma once

// Serial reference for the auxiliary loss of one group: simulate() with the
// policies' reference forward pass, then
//
//   w = (g_hat(mu_T) - Z_T)_+ + penalty.
//
// AuxiliaryEngine computes the same quantity in batches; tests compare the two.

#include <cstddef>
#include <span>

#include "mfls/constraints/constraint.hpp"
#include "mfls/dynamics/noise.hpp"
#include "mfls/dynamics/problem.hpp"
#include "mfls/levelset/engine.hpp"
#include "mfls/levelset/policy.hpp"

namespace mfls::levelset {

/// Loss of noise group `group` started at z. Without common-noise networks the
/// martingale term is zero.
GroupResult auxiliary_loss_group(const dynamics::ProblemSpec& spec, const PolicySet& policies,
                                 double z, const dynamics::NoisePlan& noise, std::size_t group,
                                 const constraints::PenaltyMode& penalty);

/// Mean over all groups of the plan, policies without common-noise inputs (inputs x, Z).
double auxiliary_loss(double z, const PolicySet& policies, const dynamics::NoisePlan& noise,
                      const dynamics::ProblemSpec& spec, const constraints::PenaltyMode& penalty);

/// Same with inputs (x, Z, W0) and martingale networks beta_i(Z, W0).
double auxiliary_loss_common(double z, const PolicySet& policies, const dynamics::NoisePlan& noise,
                             const dynamics::ProblemSpec& spec,
                             const constraints::PenaltyMode& penalty);

}  // namespace mfls::levelset
