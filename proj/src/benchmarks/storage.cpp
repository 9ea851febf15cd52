#include "mfls/benchmarks/storage.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "mfls/util/error.hpp"

namespace mfls::benchmarks {

void StorageParams::validate() const {
  market.validate();
  if (!(horizon > 0.0) || steps == 0) throw ConfigError("storage: horizon and steps must be positive");
  if (!(x_max >= 0.0)) throw ConfigError("storage: x_max must be nonnegative");
  if (!(a_lo <= 0.0 && 0.0 <= a_hi)) throw ConfigError("storage: control bounds must bracket 0");
  if (!(theta >= 0.0)) throw ConfigError("storage: price impact must be nonnegative");
  if (!(p0 >= 0.0 && p0 <= market.p_max)) throw ConfigError("storage: P0 must lie in [0, p_max]");
  if (!(penalty_weight > 0.0)) throw ConfigError("storage: penalty weight must be positive");
}

StorageParams storage_desk_params() { return {}; }

StorageParams storage_paper_params() {
  StorageParams p;
  p.horizon = 40.0;
  p.steps = 40;
  return p;
}

namespace {

std::vector<double> skeleton_production(const StorageParams& p) {
  const double dt = p.horizon / static_cast<double>(p.steps);
  std::vector<double> prod(p.steps);
  double v = p.p0;
  for (std::size_t i = 0; i < p.steps; ++i) {
    prod[i] = v;
    v += p.market.iota * (p.market.phi * p.market.p_max - v) * dt;
    v = std::clamp(v, 0.0, p.market.p_max);
  }
  return prod;
}

}  // namespace

double storage_skeleton_gain(const StorageParams& p, const std::vector<double>& command) {
  if (command.size() != p.steps) throw DimensionError("command needs one entry per step");
  const double dt = p.horizon / static_cast<double>(p.steps);
  const auto prod = skeleton_production(p);
  double gain = 0.0;
  for (std::size_t i = 0; i < p.steps; ++i) {
    const double t = dt * static_cast<double>(i);
    const double sold = prod[i] - command[i];
    gain += (dynamics::forward_curve(p.market, t) - p.theta * sold) * sold * dt;
  }
  return gain;
}

std::vector<double> storage_deterministic_command(const StorageParams& p, std::size_t levels) {
  p.validate();
  if (levels < 2) throw ConfigError("storage: command search needs at least two levels");
  const double dt = p.horizon / static_cast<double>(p.steps);
  const auto prod = skeleton_production(p);
  const double h = p.x_max / static_cast<double>(levels - 1);
  auto level_of = [&](std::size_t k) { return h * static_cast<double>(k); };

  // value[k] = best gain from step i on, storage at level k.
  std::vector<double> value(levels, 0.0), next(levels);
  std::vector<std::vector<std::size_t>> choice(p.steps, std::vector<std::size_t>(levels));
  for (std::size_t i = p.steps; i-- > 0;) {
    const double f = dynamics::forward_curve(p.market, dt * static_cast<double>(i));
    for (std::size_t k = 0; k < levels; ++k) {
      double best = -std::numeric_limits<double>::infinity();
      std::size_t arg = k;
      for (std::size_t j = 0; j < levels; ++j) {
        const double a = (level_of(j) - level_of(k)) / dt;
        if (a < p.a_lo - 1e-12 || a > p.a_hi + 1e-12) continue;
        const double sold = prod[i] - a;
        const double v = (f - p.theta * sold) * sold * dt + value[j];
        if (v > best) {
          best = v;
          arg = j;
        }
      }
      next[k] = best;
      choice[i][k] = arg;
    }
    value.swap(next);
  }
  // Start from the level closest to X0.
  std::size_t k = static_cast<std::size_t>(std::lround(p.x0 / std::max(h, 1e-300)));
  k = std::min(k, levels - 1);
  std::vector<double> command(p.steps);
  double x = p.x0;
  for (std::size_t i = 0; i < p.steps; ++i) {
    const std::size_t j = choice[i][k];
    command[i] = std::clamp((level_of(j) - x) / dt, p.a_lo, p.a_hi);
    x += command[i] * dt;
    k = j;
  }
  return command;
}

dynamics::ProblemSpec make_storage_problem(const StorageParams& p) {
  p.validate();
  dynamics::ProblemSpec spec;
  spec.name = "storage";
  spec.dynamics = std::make_shared<StorageDynamics>(StorageModel{p});
  spec.horizon = p.horizon;
  spec.steps = p.steps;
  const double x0 = p.x0, p0 = p.p0, s0 = p.s0();
  spec.initial = [x0, p0, s0](Engine&, std::span<double> x) {
    x[0] = x0;
    x[1] = p0;
    x[2] = s0;
  };
  spec.sense = dynamics::Sense::maximize;
  spec.constraints.push_back(constraints::ConstraintSpec::excursion(0.0, p.x_max, 0));
  spec.control_lo = {p.a_lo};
  spec.control_hi = {p.a_hi};
  spec.state_center = {0.5 * p.x_max, p.market.phi * p.market.p_max, p.market.base};
  spec.state_scale = {std::max(0.5 * p.x_max, 0.1), 0.05, 5.0};
  spec.baseline_control = storage_deterministic_command(p);
  spec.validate();
  return spec;
}

}  // namespace mfls::benchmarks
