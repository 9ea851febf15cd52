#include "mfls/levelset/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <random>

#include "mfls/dynamics/noise.hpp"
#include "mfls/nn/adam.hpp"
#include "mfls/util/error.hpp"
#include "mfls/util/rng.hpp"

namespace mfls::levelset {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Grid point m in the internal (minimization) orientation.
std::vector<double> internal_grid(const dynamics::ProblemSpec& spec, const std::vector<double>& grid) {
  std::vector<double> out(grid.size());
  for (std::size_t m = 0; m < grid.size(); ++m) out[m] = spec.sign() * grid[m];
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (particles == 0 || groups == 0) throw ConfigError("particles and groups must be at least 1");
  if (grid_points == 0) throw ConfigError("the z grid needs at least one point");
  if (!std::isfinite(z_lo) || !std::isfinite(z_hi)) throw ConfigError("z grid bounds must be finite");
  if (grid_points > 1 && !(z_hi > z_lo)) throw ConfigError("z_hi must exceed z_lo");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(penalty.weight > 0.0)) throw ConfigError("penalty weight must be positive");
  if (z_per_iteration == 0) throw ConfigError("z_per_iteration must be at least 1");
  if (eval_replicates == 0) throw ConfigError("eval_replicates must be at least 1");
  if (arch.hidden.empty()) throw ConfigError("networks need at least one hidden layer");
  for (auto h : arch.hidden)
    if (h == 0) throw ConfigError("hidden layer widths must be positive");
}

void write_training_log_csv(std::ostream& os, const std::vector<TrainLogRow>& log) {
  os.precision(12);
  os << "iteration,loss,grad_norm,seconds\n";
  for (const auto& r : log) os << r.iteration << ',' << r.loss << ',' << r.grad_norm << ',' << r.seconds << '\n';
}

EngineOptions engine_options(const TrainConfig& cfg, double baseline_mean) {
  EngineOptions o;
  o.penalty = cfg.penalty;
  o.common = cfg.common;
  o.use_baseline = cfg.use_baseline;
  o.baseline_mean = baseline_mean;
  o.parallel = cfg.parallel;
  return o;
}

double estimate_baseline_mean(const dynamics::ProblemSpec& spec, const TrainConfig& cfg) {
  const auto plan = dynamics::NoisePlan::generate(spec, cfg.baseline_groups, cfg.particles, cfg.seed, "baseline");
  EngineOptions o = engine_options(cfg);
  o.use_baseline = false;
  const AuxiliaryEngine engine(spec, o);
  return engine.baseline_cost(plan);
}

void normalize_z_inputs(const dynamics::ProblemSpec& spec, const TrainConfig& cfg, PolicySet& policies) {
  const auto grid = internal_grid(spec, cfg.grid());
  const auto [lo, hi] = std::minmax_element(grid.begin(), grid.end());
  const double center = 0.5 * (*lo + *hi), half = 0.5 * (*hi - *lo);
  const std::size_t groups = std::max<std::size_t>(cfg.pilot_groups, 1);
  const auto plan = dynamics::NoisePlan::generate(spec, groups, cfg.particles, cfg.seed, "pilot");
  EngineOptions o = engine_options(cfg);
  o.use_baseline = false;
  const AuxiliaryEngine engine(spec, o);
  const std::vector<double> z(groups, center);
  EngineTrace trace;
  engine.evaluate(policies, z, plan, &trace);

  const std::size_t steps = spec.steps;
  std::vector<double> offset(steps), scale(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    double s = 0.0, s2 = 0.0;
    for (std::size_t g = 0; g < groups; ++g) s += trace.z_path[g * (steps + 1) + i];
    const double mean = s / static_cast<double>(groups);
    for (std::size_t g = 0; g < groups; ++g) {
      const double e = trace.z_path[g * (steps + 1) + i] - mean;
      s2 += e * e;
    }
    const double sd = std::sqrt(s2 / static_cast<double>(groups));
    offset[i] = mean;
    scale[i] = std::max({sd, half, 1e-6});
  }
  policies.set_z_normalization(offset, scale, spec.grid(), spec.dims().state);
}

LevelSetCurve evaluate_curve(const dynamics::ProblemSpec& spec, const PolicySet& policies,
                             const EngineOptions& options, const std::vector<double>& grid,
                             double epsilon, std::size_t particles, std::size_t groups,
                             std::size_t replicates, std::uint64_t seed) {
  if (particles == 0 || groups == 0 || replicates == 0)
    throw ConfigError("curve evaluation needs particles, groups and replicates");
  const AuxiliaryEngine engine(spec, options);
  const auto zin = internal_grid(spec, grid);
  const std::size_t M = grid.size();
  // Bound the lanes per engine call.
  const std::size_t per_z = groups * particles;
  const std::size_t chunk = std::max<std::size_t>(1, std::min(M, (std::size_t{1} << 22) / per_z));

  std::vector<double> sum(M, 0.0), sum2(M, 0.0);
  for (std::size_t r = 0; r < replicates; ++r) {
    const auto plan = dynamics::NoisePlan::generate(spec, groups, particles, seed, "eval", r);
    for (std::size_t m0 = 0; m0 < M; m0 += chunk) {
      const std::size_t m1 = std::min(M, m0 + chunk);
      std::vector<double> z;
      z.reserve((m1 - m0) * groups);
      for (std::size_t m = m0; m < m1; ++m) z.insert(z.end(), groups, zin[m]);
      const auto res = engine.evaluate(policies, z, plan);
      for (std::size_t m = m0; m < m1; ++m)
        for (std::size_t k = 0; k < groups; ++k) {
          const double v = res.groups[(m - m0) * groups + k].loss;
          sum[m] += v;
          sum2[m] += v * v;
        }
    }
  }
  LevelSetCurve c;
  c.z = grid;
  c.epsilon = epsilon;
  c.sense = spec.sense;
  const double n = static_cast<double>(replicates * groups);
  c.w.resize(M);
  c.stderr_.resize(M);
  for (std::size_t m = 0; m < M; ++m) {
    c.w[m] = sum[m] / n;
    const double var = n > 1 ? std::max(0.0, (sum2[m] - n * c.w[m] * c.w[m]) / (n - 1)) : 0.0;
    c.stderr_[m] = std::sqrt(var / n);
  }
  c.value = extract_value(c, epsilon);
  return c;
}

TrainResult train(const dynamics::ProblemSpec& spec, const TrainConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  spec.validate();
  const auto t0 = Clock::now();
  TrainResult out;
  out.policies = PolicySet::build(spec, cfg.arch, cfg.common, cfg.seed);
  if (cfg.use_baseline) out.baseline_mean = estimate_baseline_mean(spec, cfg);
  normalize_z_inputs(spec, cfg, out.policies);

  const auto grid = cfg.grid();
  const auto zin = internal_grid(spec, grid);
  const AuxiliaryEngine engine(spec, engine_options(cfg, out.baseline_mean));
  std::vector<double> params = out.policies.flatten(), grad(params.size());
  nn::AdamState adam(params.size(), {cfg.learning_rate});

  std::vector<double> z(cfg.z_per_iteration * cfg.groups);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const auto plan = dynamics::NoisePlan::generate(spec, cfg.groups, cfg.particles, cfg.seed, "train", it);
    Engine rng(derive_seed(cfg.seed, "z", {it}));
    std::uniform_int_distribution<std::size_t> pick(0, zin.size() - 1);
    for (std::size_t j = 0; j < cfg.z_per_iteration; ++j) {
      const double zj = zin[pick(rng)];
      std::fill_n(z.begin() + j * cfg.groups, cfg.groups, zj);
    }
    LossResult res;
    try {
      res = engine.gradient(out.policies, z, plan, grad);
    } catch (const NonFiniteError& e) {
      throw DivergenceError(it, e.what());
    } catch (const SimulationError& e) {
      throw DivergenceError(it, e.what());
    }
    double g2 = 0.0;
    for (double g : grad) g2 += g * g;
    if (!std::isfinite(res.loss) || !std::isfinite(g2)) throw DivergenceError(it, "non-finite loss or gradient");
    nn::adam_step(params, grad, adam);
    out.policies.unflatten(params);
    if (!std::all_of(params.begin(), params.end(), [](double v) { return std::isfinite(v); }))
      throw DivergenceError(it, "non-finite parameters after the update");

    if (it % cfg.log_every == 0 || it + 1 == cfg.iterations) {
      TrainLogRow row{it, res.loss, std::sqrt(g2), seconds_since(t0)};
      out.log.push_back(row);
      if (progress) progress(row);
    }
  }
  out.train_seconds = seconds_since(t0);

  const auto t1 = Clock::now();
  out.curve = evaluate_curve(spec, out.policies, engine_options(cfg, out.baseline_mean), grid, cfg.epsilon,
                             cfg.eval_particles_or_default(), cfg.eval_groups_or_default(),
                             cfg.eval_replicates, cfg.seed);
  out.eval_seconds = seconds_since(t1);
  return out;
}

}  // namespace mfls::levelset
