#pragma once

// Serial particle simulation, one particle at a time. This is the reference
// implementation of the particle scheme; the batched trainer in levelset/ is
// tested against it.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "mfls/dynamics/noise.hpp"
#include "mfls/dynamics/problem.hpp"
#include "mfls/measures/empirical.hpp"

namespace mfls::dynamics {

/// Feedback control evaluated at (step, x, Z, W0).
class ControlLaw {
 public:
  virtual ~ControlLaw() = default;
  virtual void control(std::size_t step, double t, std::span<const double> x, double z,
                       std::span<const double> w0, std::span<double> a) const = 0;
  /// Martingale control beta_i(Z, W0) of the common-noise auxiliary state; zero by default.
  virtual void martingale(std::size_t step, double z, std::span<const double> w0,
                          std::span<double> beta) const;
};

/// Control law from a plain function of (step, t, x).
class FeedbackLaw final : public ControlLaw {
 public:
  using Fn = std::function<void(std::size_t step, double t, std::span<const double> x,
                                std::span<double> a)>;
  explicit FeedbackLaw(Fn fn) : fn_(std::move(fn)) {}
  void control(std::size_t step, double t, std::span<const double> x, double,
               std::span<const double>, std::span<double> a) const override {
    fn_(step, t, x, a);
  }

 private:
  Fn fn_;
};

struct ParticleEnsemble {
  TimeGrid grid;
  std::size_t dim = 0;
  std::size_t step = 0;
  std::vector<double> states;  // N x d, row-major

  std::size_t size() const { return dim == 0 ? 0 : states.size() / dim; }
  std::span<double> particle(std::size_t j) { return {states.data() + j * dim, dim}; }
  std::span<const double> particle(std::size_t j) const { return {states.data() + j * dim, dim}; }
  std::vector<double> coordinate(std::size_t k) const;
  measures::EmpiricalMeasure measure() const { return {states, dim}; }
};

/// z and the running account Z_i shared by all particles of the ensemble.
struct AuxiliaryState {
  double z = 0.0;
  double value = 0.0;
  /// W0 at the current step (p coordinates).
  std::vector<double> w0;
};

ParticleEnsemble sample_initial(const ProblemSpec& spec, std::size_t n, std::uint64_t seed);

/// Initial ensemble of one group of a noise plan.
ParticleEnsemble initial_from_plan(const ProblemSpec& spec, const NoisePlan& noise, std::size_t group);

struct StepOutput {
  measures::EmpiricalMeasure joint;  // rows (x, a), the empirical state-control law
  double mean_cost = 0.0;            // (1/N) sum_j f, before the problem's sign
  std::vector<double> controls;      // N x q
};

/// Advances every particle one step with coefficients frozen at the empirical
/// joint law of the current step, then updates aux:
///   Z <- Z - sign * mean f * dt + beta . dW0.
StepOutput euler_step(ParticleEnsemble& ens, AuxiliaryState& aux, const ControlLaw& law,
                      const NoisePlan& noise, std::size_t group, const ProblemSpec& spec);

struct TrajectoryRecord {
  TimeGrid grid;
  std::size_t particles = 0;
  std::size_t state_dim = 0;
  std::size_t control_dim = 0;
  std::vector<double> states;    // (N_T + 1) x N x d
  std::vector<double> controls;  // N_T x N x q
  std::vector<double> z_path;    // N_T + 1
  std::vector<double> psi;       // N_T + 1, Psi(t_i, mu_i) (max over constraints; 0 if none)
  std::vector<double> mean_cost; // N_T, (1/N) sum_j f(t_i, ...)
  double running_cost = 0.0;     // sum_i mean_cost_i dt (problem's own sign)
  double terminal_cost = 0.0;    // G(mean psi(X_T)) (problem's own sign)
  double phi = 0.0;              // terminal constraint value, 0 if none

  double cost() const { return running_cost + terminal_cost; }
  std::span<const double> states_at(std::size_t i) const {
    return {states.data() + i * particles * state_dim, particles * state_dim};
  }
  std::vector<double> coordinate_at(std::size_t i, std::size_t k) const;

  /// Columns: step,time,particle,x0..,a0..,Z,psi. Controls are blank at the last step.
  void write_csv(std::ostream& os, std::size_t max_particles = SIZE_MAX) const;
  /// Per-step means and population variances of each state coordinate.
  void write_summary_json(std::ostream& os) const;
};

/// Psi(t, mu) = max_l Psi_l(t, mu) on the ensemble; 0 when there are no constraints.
double constraint_value(const ProblemSpec& spec, double t, std::span<const double> states,
                        std::size_t dim);

TrajectoryRecord simulate(const ProblemSpec& spec, const ControlLaw& law, double z,
                          const NoisePlan& noise, std::size_t group = 0);

}  // namespace mfls::dynamics
