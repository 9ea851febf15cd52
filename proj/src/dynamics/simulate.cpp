#include "mfls/dynamics/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "json.hpp"

namespace mfls::dynamics {

void ControlLaw::martingale(std::size_t, double, std::span<const double>,
                            std::span<double> beta) const {
  std::fill(beta.begin(), beta.end(), 0.0);
}

std::vector<double> ParticleEnsemble::coordinate(std::size_t k) const {
  std::vector<double> out(size());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = states[j * dim + k];
  return out;
}

ParticleEnsemble sample_initial(const ProblemSpec& spec, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ConfigError("ensemble needs at least one particle");
  ParticleEnsemble ens;
  ens.grid = spec.grid();
  ens.dim = spec.dims().state;
  ens.states.resize(n * ens.dim);
  Engine eng(derive_seed(seed, "initial"));
  for (std::size_t j = 0; j < n; ++j) spec.initial(eng, ens.particle(j));
  return ens;
}

ParticleEnsemble initial_from_plan(const ProblemSpec& spec, const NoisePlan& noise,
                                   std::size_t group) {
  ParticleEnsemble ens;
  ens.grid = spec.grid();
  ens.dim = spec.dims().state;
  const std::size_t n = noise.particles, total = noise.total();
  ens.states.resize(n * ens.dim);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < ens.dim; ++k)
      ens.states[j * ens.dim + k] = noise.x0[k * total + group * n + j];
  return ens;
}

namespace {

void check_finite(std::span<const double> v, std::size_t step, std::size_t particle,
                  const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) throw SimulationError(step, particle, std::string("non-finite ") + what);
}

}  // namespace

StepOutput euler_step(ParticleEnsemble& ens, AuxiliaryState& aux, const ControlLaw& law,
                      const NoisePlan& noise, std::size_t group, const ProblemSpec& spec) {
  const auto dm = spec.dims();
  const std::size_t n = ens.size(), d = dm.state, q = dm.control, i = ens.step;
  if (i >= spec.steps) throw SimulationError(i, 0, "ensemble already at the horizon");
  if (noise.particles != n || group >= noise.groups)
    throw DimensionError("noise plan does not match the ensemble");
  const auto ctx = ens.grid.context(i);

  if (aux.w0.size() != dm.common) aux.w0.assign(dm.common, 0.0);
  std::vector<double> controls(n * q);
  for (std::size_t j = 0; j < n; ++j)
    law.control(i, ctx.t, ens.particle(j), aux.value, aux.w0, {controls.data() + j * q, q});
  check_finite(controls, i, 0, "control");

  std::vector<double> m(dm.features, 0.0), phi(dm.features);
  for (std::size_t j = 0; j < n; ++j) {
    spec.dynamics->features(ctx, 1, 1, ens.particle(j).data(), controls.data() + j * q, phi.data());
    for (std::size_t k = 0; k < dm.features; ++k) m[k] += phi[k];
  }
  for (auto& v : m) v /= static_cast<double>(n);

  std::vector<double> dw0(dm.common);
  for (std::size_t k = 0; k < dm.common; ++k) dw0[k] = noise.dw0_at(i, k, group);

  std::vector<double> next(n * d), dw(dm.noise);
  double cost_sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < dm.noise; ++k) dw[k] = noise.dw_at(i, k)[group * n + j];
    double c = 0.0;
    spec.dynamics->transition(ctx, 1, 1, ens.particle(j).data(), controls.data() + j * q, m.data(),
                              dw.data(), dw0.data(), next.data() + j * d, &c);
    check_finite({next.data() + j * d, d}, i, j, "state");
    cost_sum += c;
  }
  const double mean_cost = cost_sum / static_cast<double>(n);

  std::vector<double> beta(dm.common, 0.0);
  if (dm.common > 0) law.martingale(i, aux.value, aux.w0, beta);
  double zn = aux.value - spec.sign() * mean_cost * ctx.dt;
  for (std::size_t k = 0; k < dm.common; ++k) zn += beta[k] * dw0[k];
  aux.value = zn;
  for (std::size_t k = 0; k < dm.common; ++k) aux.w0[k] += dw0[k];

  std::vector<double> joint(n * (d + q));
  for (std::size_t j = 0; j < n; ++j) {
    std::copy_n(ens.states.data() + j * d, d, joint.data() + j * (d + q));
    std::copy_n(controls.data() + j * q, q, joint.data() + j * (d + q) + d);
  }
  ens.states = std::move(next);
  ens.step += 1;
  return {measures::EmpiricalMeasure(std::move(joint), d + q), mean_cost, std::move(controls)};
}

double constraint_value(const ProblemSpec& spec, double t, std::span<const double> states,
                        std::size_t dim) {
  if (spec.constraints.empty()) return 0.0;
  const std::size_t n = states.size() / dim;
  const constraints::TimePoint tp{t, spec.horizon};
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> x(n);
  for (const auto& c : spec.constraints) {
    const std::size_t k = c.read_coordinate();
    for (std::size_t j = 0; j < n; ++j) x[j] = states[j * dim + k];
    best = std::max(best, constraints::evaluate(c, tp, x));
  }
  return best;
}

TrajectoryRecord simulate(const ProblemSpec& spec, const ControlLaw& law, double z,
                          const NoisePlan& noise, std::size_t group) {
  const auto dm = spec.dims();
  TrajectoryRecord rec;
  rec.grid = spec.grid();
  rec.particles = noise.particles;
  rec.state_dim = dm.state;
  rec.control_dim = dm.control;
  const std::size_t n = rec.particles, d = dm.state;

  ParticleEnsemble ens = initial_from_plan(spec, noise, group);
  AuxiliaryState aux{z, z, std::vector<double>(dm.common, 0.0)};
  rec.states.insert(rec.states.end(), ens.states.begin(), ens.states.end());
  rec.z_path.push_back(z);
  rec.psi.push_back(constraint_value(spec, 0.0, ens.states, d));
  for (std::size_t i = 0; i < spec.steps; ++i) {
    auto out = euler_step(ens, aux, law, noise, group, spec);
    rec.controls.insert(rec.controls.end(), out.controls.begin(), out.controls.end());
    rec.mean_cost.push_back(out.mean_cost);
    rec.running_cost += out.mean_cost * rec.grid.dt();
    rec.states.insert(rec.states.end(), ens.states.begin(), ens.states.end());
    rec.z_path.push_back(aux.value);
    rec.psi.push_back(constraint_value(spec, rec.grid.time(i + 1), ens.states, d));
  }
  std::vector<double> mpsi(dm.terminal_features, 0.0), psi(dm.terminal_features);
  for (std::size_t j = 0; j < n; ++j) {
    spec.dynamics->terminal_features(1, 1, ens.particle(j).data(), psi.data());
    for (std::size_t k = 0; k < psi.size(); ++k) mpsi[k] += psi[k];
  }
  for (auto& v : mpsi) v /= static_cast<double>(n);
  rec.terminal_cost = spec.dynamics->terminal_cost(mpsi.data(), nullptr);
  if (spec.terminal_constraint) {
    const auto x = ens.coordinate(spec.terminal_constraint->read_coordinate());
    rec.phi = constraints::evaluate(*spec.terminal_constraint, {spec.horizon, spec.horizon}, x);
  }
  return rec;
}

std::vector<double> TrajectoryRecord::coordinate_at(std::size_t i, std::size_t k) const {
  std::vector<double> out(particles);
  const auto s = states_at(i);
  for (std::size_t j = 0; j < particles; ++j) out[j] = s[j * state_dim + k];
  return out;
}

void TrajectoryRecord::write_csv(std::ostream& os, std::size_t max_particles) const {
  os << "step,time,particle";
  for (std::size_t k = 0; k < state_dim; ++k) os << ",x" << k;
  for (std::size_t k = 0; k < control_dim; ++k) os << ",a" << k;
  os << ",Z,psi\n";
  const std::size_t np = std::min(particles, max_particles);
  os.precision(17);
  for (std::size_t i = 0; i <= grid.steps; ++i) {
    const auto s = states_at(i);
    for (std::size_t j = 0; j < np; ++j) {
      os << i << ',' << grid.time(i) << ',' << j;
      for (std::size_t k = 0; k < state_dim; ++k) os << ',' << s[j * state_dim + k];
      for (std::size_t k = 0; k < control_dim; ++k) {
        os << ',';
        if (i < grid.steps) os << controls[(i * particles + j) * control_dim + k];
      }
      os << ',' << z_path[i] << ',' << psi[i] << '\n';
    }
  }
}

void TrajectoryRecord::write_summary_json(std::ostream& os) const {
  nlohmann::json steps = nlohmann::json::array();
  for (std::size_t i = 0; i <= grid.steps; ++i) {
    nlohmann::json mean = nlohmann::json::array(), var = nlohmann::json::array();
    for (std::size_t k = 0; k < state_dim; ++k) {
      const auto x = coordinate_at(i, k);
      mean.push_back(measures::mean(x));
      var.push_back(measures::variance(x));
    }
    steps.push_back({{"step", i}, {"time", grid.time(i)}, {"mean", mean}, {"variance", var},
                     {"Z", z_path[i]}, {"psi", psi[i]}});
  }
  nlohmann::json j{{"particles", particles},   {"running_cost", running_cost},
                   {"terminal_cost", terminal_cost}, {"cost", cost()},
                   {"phi", phi},               {"steps", steps}};
  os << j.dump(2) << '\n';
}

}  // namespace mfls::dynamics
