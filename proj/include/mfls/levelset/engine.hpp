#pragma once

// Batched evaluation of the auxiliary loss
//
//   w(z) = E[ (g_hat(mu_T) - Z_T)_+ + penalty(Psi(t_1, mu_1), ..., Psi(t_NT, mu_NT), phi(mu_T)) ]
//
// over independent groups of N interacting particles, and its exact gradient
// with respect to all policy parameters (pathwise through the particle dynamics
// and the empirical-measure averages). Particles are processed in lane blocks;
// every reduction runs in a fixed order, so results do not depend on the
// number of OpenMP threads.

#include <cstddef>
#include <span>
#include <vector>

#include "mfls/constraints/constraint.hpp"
#include "mfls/dynamics/noise.hpp"
#include "mfls/dynamics/problem.hpp"
#include "mfls/levelset/policy.hpp"

namespace mfls::levelset {

struct EngineOptions {
  constraints::PenaltyMode penalty;
  /// Common-noise mode: W0 is a policy input and Z carries the beta . dW0 term.
  bool common = false;
  /// Adds C(baseline) - baseline_mean to Z_T, where C is the running cost of a
  /// shadow ensemble driven by the same noise under the problem's baseline command.
  bool use_baseline = false;
  double baseline_mean = 0.0;
  /// Run the particle loops with OpenMP.
  bool parallel = true;
};

/// Loss pieces of one group; costs are in the internal (minimization) sign.
struct GroupResult {
  double loss = 0.0;
  double shortfall = 0.0;  // (g_hat - Z_T)_+
  double penalty = 0.0;
  double terminal = 0.0;   // g_hat
  double z_final = 0.0;    // Z_T, including the baseline adjustment
  double running = 0.0;    // sum_i mean f_i dt
  double phi = 0.0;
  double max_psi = 0.0;    // max_i Psi(t_i, mu_i), i >= 1
};

struct LossResult {
  double loss = 0.0;    // mean over groups
  double stderr_ = 0.0; // standard error of that mean
  std::vector<GroupResult> groups;
};

/// Optional detail from a forward evaluation.
struct EngineTrace {
  std::size_t keep_particles = 0;        // paths kept for the first particles, group-major
  std::vector<double> z_path;            // groups x (N_T + 1)
  std::vector<double> psi;               // groups x (N_T + 1)
  std::vector<double> states;            // (N_T + 1) x keep x d
  std::vector<double> controls;          // N_T x keep x q
  std::vector<double> terminal_states;   // d x (groups * N), all particles at T
};

class AuxiliaryEngine {
 public:
  AuxiliaryEngine(const dynamics::ProblemSpec& spec, EngineOptions options);

  const dynamics::ProblemSpec& spec() const noexcept { return *spec_; }
  const EngineOptions& options() const noexcept { return opts_; }

  /// One z per group; group g draws its randomness from noise group g % noise.groups.
  LossResult evaluate(const PolicySet& policies, std::span<const double> z,
                      const dynamics::NoisePlan& noise, EngineTrace* trace = nullptr) const;

  /// Same loss; `grad` (size policies.parameter_count(), flat layout of
  /// PolicySet::flatten) receives d loss / d parameters.
  LossResult gradient(const PolicySet& policies, std::span<const double> z,
                      const dynamics::NoisePlan& noise, std::span<double> grad) const;

  /// Mean running cost (internal sign) of the baseline command on the given noise.
  double baseline_cost(const dynamics::NoisePlan& noise) const;

 private:
  struct Run;
  LossResult run(const PolicySet& policies, std::span<const double> z,
                 const dynamics::NoisePlan& noise, EngineTrace* trace, std::span<double> grad) const;

  const dynamics::ProblemSpec* spec_;
  EngineOptions opts_;
};

}  // namespace mfls::levelset
