#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "mfls/constraints/constraint.hpp"
#include "mfls/dynamics/problem.hpp"
#include "mfls/levelset/curve.hpp"
#include "mfls/levelset/engine.hpp"
#include "mfls/levelset/policy.hpp"

namespace mfls::levelset {

struct TrainConfig {
  std::size_t particles = 4096;  // N, particles per group
  std::size_t groups = 1;        // K0, common-noise paths per batch
  double z_lo = 0.0, z_hi = 1.0;  // grid bounds in the problem's orientation
  std::size_t grid_points = 25;  // M
  constraints::PenaltyMode penalty;
  double epsilon = 1e-8;
  std::size_t iterations = 5000;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  bool common = false;
  Architecture arch;
  /// Grid points drawn per iteration; every drawn z shares the batch noise.
  std::size_t z_per_iteration = 1;
  std::size_t eval_particles = 0;  // 0: 2 * particles
  std::size_t eval_groups = 0;     // 0: groups
  std::size_t eval_replicates = 4;
  bool use_baseline = false;
  std::size_t baseline_groups = 20000;
  std::size_t pilot_groups = 64;
  std::size_t log_every = 10;
  bool parallel = true;

  void validate() const;
  std::vector<double> grid() const { return regular_grid(z_lo, z_hi, grid_points); }
  std::size_t eval_particles_or_default() const { return eval_particles ? eval_particles : 2 * particles; }
  std::size_t eval_groups_or_default() const { return eval_groups ? eval_groups : groups; }
};

struct TrainLogRow {
  std::size_t iteration = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  PolicySet policies;
  LevelSetCurve curve;
  std::vector<TrainLogRow> log;
  double baseline_mean = 0.0;  // internal sign
  double train_seconds = 0.0;
  double eval_seconds = 0.0;
};

void write_training_log_csv(std::ostream& os, const std::vector<TrainLogRow>& log);

/// Engine options implied by a training config.
EngineOptions engine_options(const TrainConfig& cfg, double baseline_mean = 0.0);

/// Expected running cost of the problem's baseline command (internal sign),
/// from the "baseline" noise stream.
double estimate_baseline_mean(const dynamics::ProblemSpec& spec, const TrainConfig& cfg);

/// Sets the Z input standardization from a pilot run of the current policies.
void normalize_z_inputs(const dynamics::ProblemSpec& spec, const TrainConfig& cfg, PolicySet& policies);

using ProgressFn = std::function<void(const TrainLogRow&)>;

/// Trains one policy family over the whole z grid, then evaluates the curve on
/// independent noise (stream "eval") and extracts V0.
TrainResult train(const dynamics::ProblemSpec& spec, const TrainConfig& cfg,
                  const ProgressFn& progress = {});

/// Auxiliary loss at every grid point on `replicates` independent batches of
/// `groups` x `particles`, shared across z.
LevelSetCurve evaluate_curve(const dynamics::ProblemSpec& spec, const PolicySet& policies,
                             const EngineOptions& options, const std::vector<double>& grid,
                             double epsilon, std::size_t particles, std::size_t groups,
                             std::size_t replicates, std::uint64_t seed);

}  // namespace mfls::levelset
