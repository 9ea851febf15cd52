#include <cmath>
#include <memory>
#include <vector>

#include "doctest.h"
#include "mfls/benchmarks/markowitz.hpp"
#include "mfls/benchmarks/storage.hpp"
#include "mfls/dynamics/noise.hpp"
#include "mfls/dynamics/simulate.hpp"
#include "mfls/dynamics/storage_market.hpp"
#include "mfls/measures/empirical.hpp"

using namespace mfls;
using namespace mfls::dynamics;

namespace {

// dX = c x dt + s dW with running cost f = k x.
struct LinearCoeffs {
  double c = 0.0, s = 0.0, k = 0.0;
  ModelDims dims() const { return {1, 1, 1, 0, 0, 1}; }
  std::string name() const { return "linear"; }
  template <class T> void drift(const StepContext&, const T* x, const T*, const T*, T* b) const { b[0] = c * x[0]; }
  template <class T> void diffusion(const StepContext&, const T*, const T*, const T*, T* v) const { v[0] = T(s); }
  template <class T> void common_diffusion(const StepContext&, const T*, const T*, const T*, T*) const {}
  template <class T> T running_cost(const StepContext&, const T* x, const T*, const T*) const { return k * x[0]; }
  template <class T> void features(const StepContext&, const T*, const T*, T*) const {}
  template <class T> void terminal_features(const T* x, T* psi) const { psi[0] = x[0]; }
  double terminal_cost(const double* m, double* g) const {
    if (g) g[0] = 0.0;
    (void)m;
    return 0.0;
  }
};

ProblemSpec linear_spec(double c, double s, double k, double T, std::size_t steps, double x0) {
  ProblemSpec spec;
  spec.name = "linear";
  spec.dynamics = std::make_shared<ModelDynamics<EulerModel<LinearCoeffs>>>(EulerModel<LinearCoeffs>{{c, s, k}});
  spec.horizon = T;
  spec.steps = steps;
  spec.initial = [x0](Engine&, std::span<double> x) { x[0] = x0; };
  return spec;
}

const FeedbackLaw kZero([](std::size_t, double, std::span<const double>, std::span<double> a) { a[0] = 0.0; });

}  // namespace

TEST_CASE("point-mass initial law") {
  const auto spec = linear_spec(0, 0, 0, 1, 1, 1.0);
  const auto ens = sample_initial(spec, 3, 7);
  CHECK(ens.states == std::vector<double>{1, 1, 1});
}

TEST_CASE("standard normal initial law passes a CLT check") {
  auto spec = linear_spec(0, 0, 0, 1, 1, 0.0);
  spec.initial = [](Engine& e, std::span<double> x) { x[0] = std::normal_distribution<double>()(e); };
  const std::size_t n = 100000;
  const auto ens = sample_initial(spec, n, 11);
  CHECK(std::abs(measures::mean(ens.states)) < 3.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("frozen dynamics keep states and debit the running cost") {
  const auto spec = linear_spec(0, 0, 2.0, 1, 4, 1.5);
  const auto plan = NoisePlan::generate(spec, 1, 5, 1, "t");
  auto ens = initial_from_plan(spec, plan, 0);
  AuxiliaryState aux{0.3, 0.3, {}};
  const auto before = ens.states;
  euler_step(ens, aux, kZero, plan, 0, spec);
  CHECK(ens.states == before);
  CHECK(aux.value == doctest::Approx(0.3 - 2.0 * 1.5 * 0.25).epsilon(1e-15));
}

TEST_CASE("explicit Euler step for b = x") {
  const auto spec = linear_spec(1.0, 0.0, 0.0, 0.1, 1, 1.0);
  const auto plan = NoisePlan::generate(spec, 1, 1, 1, "t");
  auto ens = initial_from_plan(spec, plan, 0);
  AuxiliaryState aux{};
  euler_step(ens, aux, kZero, plan, 0, spec);
  CHECK(ens.states[0] == doctest::Approx(1.1).epsilon(1e-15));
}

TEST_CASE("Z telescopes to z minus the accumulated running cost") {
  const auto spec = linear_spec(0.3, 0.2, 1.0, 1.0, 10, 1.0);
  const auto plan = NoisePlan::generate(spec, 1, 50, 4, "t");
  const auto rec = simulate(spec, kZero, 2.0, plan);
  double acc = 2.0;
  for (double c : rec.mean_cost) acc -= c * spec.grid().dt();
  CHECK(rec.z_path.back() == doctest::Approx(acc).epsilon(1e-14));
}

TEST_CASE("null Markowitz control gives constant paths and a frozen Z") {
  benchmarks::MeanVarianceParams p;
  const auto spec = benchmarks::make_markowitz_problem(p, 20);
  const auto plan = NoisePlan::generate(spec, 1, 100, 2, "t");
  const auto rec = simulate(spec, kZero, -1.0, plan);
  for (double x : rec.states) CHECK(x == 1.0);
  for (double z : rec.z_path) CHECK(z == -1.0);
}

TEST_CASE("simulation is deterministic in the seed") {
  benchmarks::MeanVarianceParams p;
  const auto spec = benchmarks::make_markowitz_problem(p, 10);
  const auto fb = benchmarks::markowitz_analytic_control(p);
  const FeedbackLaw law([&](std::size_t, double, std::span<const double> x, std::span<double> a) { a[0] = fb(x[0]); });
  const auto a = simulate(spec, law, 0.0, NoisePlan::generate(spec, 1, 64, 9, "t"));
  const auto b = simulate(spec, law, 0.0, NoisePlan::generate(spec, 1, 64, 9, "t"));
  CHECK(a.states == b.states);
}

TEST_CASE("analytic Markowitz feedback reaches the closed-form value") {
  benchmarks::MeanVarianceParams p;
  const auto spec = benchmarks::make_markowitz_problem(p, 50);
  const auto fb = benchmarks::markowitz_analytic_control(p);
  const FeedbackLaw law([&](std::size_t, double, std::span<const double> x, std::span<double> a) { a[0] = fb(x[0]); });
  const auto rec = simulate(spec, law, 0.0, NoisePlan::generate(spec, 1, 100000, 5, "t"));
  const double v = benchmarks::markowitz_analytic_value(p);
  CHECK(v == doctest::Approx(-1.05041).epsilon(1e-5));
  CHECK(std::abs(rec.cost() - v) < 0.01 * std::abs(v));
  const auto xt = rec.coordinate_at(50, 0);
  CHECK(measures::mean(xt) == doctest::Approx(1.1008).epsilon(0.01));
  CHECK(measures::variance(xt) == doctest::Approx(0.0504).epsilon(0.1));
}

TEST_CASE("deterministic storage skeleton") {
  StorageMarketParams m;
  m.sigma_f = 0.0;
  m.sigma_p = 0.0;
  double p = 0.1, s = forward_curve(m, 0.0);
  for (int i = 0; i < 10; ++i) {
    const double t = i * 0.5;
    const double p_expected = p + m.iota * (m.phi * m.p_max - p) * 0.5;
    storage_market_step(m, t, 0.5, p, s, 0.3, -0.7, 1.1);
    CHECK(s == doctest::Approx(forward_curve(m, t + 0.5)).epsilon(1e-14));
    CHECK(p == doctest::Approx(p_expected).epsilon(1e-14));
  }
}

TEST_CASE("spot is a martingale around the forward curve and production stays in range") {
  StorageMarketParams m;
  m.rho = 0.5;
  const std::size_t n = 100000, steps = 10;
  const double dt = 1.0;
  Engine eng(17);
  std::normal_distribution<double> nd(0.0, std::sqrt(dt));
  std::vector<double> p(n, 0.12), s(n, forward_curve(m, 0.0)), sum(steps, 0.0);
  bool in_range = true;
  for (std::size_t i = 0; i < steps; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      storage_market_step(m, i * dt, dt, p[j], s[j], nd(eng), nd(eng), nd(eng));
      sum[i] += s[j];
      in_range = in_range && p[j] >= 0.0 && p[j] <= m.p_max;
    }
  CHECK(in_range);
  for (std::size_t i = 0; i < steps; ++i) {
    const double f = forward_curve(m, (i + 1) * dt);
    CHECK(std::abs(sum[i] / n - f) < 0.01 * f);
  }
}

TEST_CASE("storage market rejects a negative forward price") {
  StorageMarketParams m;
  m.base = -100.0;
  double p = 0.1, s = 1.0;
  CHECK_THROWS(storage_market_step(m, 0.0, 1.0, p, s, 0, 0, 0));
}

TEST_CASE("with rho = 1 every particle sees the same production noise") {
  auto sp = benchmarks::storage_desk_params();
  const auto spec = benchmarks::make_storage_problem(sp);
  const auto plan = NoisePlan::generate(spec, 1, 20, 3, "t");
  const FeedbackLaw law([](std::size_t, double, std::span<const double>, std::span<double> a) { a[0] = 0.05; });
  const auto rec = simulate(spec, law, 0.0, plan);
  for (std::size_t i = 0; i <= spec.steps; ++i) {
    const auto prod = rec.coordinate_at(i, 1);
    for (double v : prod) CHECK(v == prod[0]);
  }
}
