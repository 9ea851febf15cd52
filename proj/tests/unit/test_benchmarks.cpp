#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "mfls/benchmarks/markowitz.hpp"
#include "mfls/benchmarks/registry.hpp"
#include "mfls/benchmarks/storage.hpp"
#include "mfls/benchmarks/storage_dp.hpp"
#include "mfls/util/error.hpp"

using namespace mfls;
using namespace mfls::benchmarks;

TEST_CASE("mean-variance closed forms") {
  MeanVarianceParams p;
  // r^2 T / sigma^2 = 0.0225 / 0.1225
  const double e = std::exp(0.0225 / 0.1225) - 1.0;
  CHECK(markowitz_analytic_value(p) == doctest::Approx(-1.0 - e / 4.0).epsilon(1e-14));
  CHECK(markowitz_analytic_value(p) == doctest::Approx(-1.05041).epsilon(1e-5));
  CHECK(markowitz_matching_variance(p) == doctest::Approx(0.0504).epsilon(1e-3));
  p.r = 0.0;
  CHECK(markowitz_analytic_value(p) == -1.0);
}

TEST_CASE("primal and dual values are linked through the matching budget") {
  MeanVarianceParams p;
  p.vartheta = markowitz_matching_variance(p);
  const double j = markowitz_primal_value(p);
  CHECK(j == doctest::Approx(-1.1008).epsilon(1e-4));
  CHECK(p.lambda * p.vartheta + j == doctest::Approx(markowitz_analytic_value(p)).epsilon(1e-13));
}

TEST_CASE("analytic feedback coefficients") {
  MeanVarianceParams p;
  const auto fb = markowitz_analytic_control(p);
  CHECK(fb.gain == doctest::Approx(0.15 / 0.1225).epsilon(1e-14));
  CHECK(fb.target == doctest::Approx(1.0 + std::exp(0.0225 / 0.1225) / 2.0).epsilon(1e-14));
  CHECK(fb(fb.target) == 0.0);
}

namespace {

StorageParams toy_storage() {
  StorageParams p;
  p.horizon = 3.0;
  p.steps = 3;
  p.x_max = 1.0;
  p.x0 = 0.5;
  p.p0 = 0.06;
  p.a_lo = -0.5;
  p.a_hi = 0.5;
  p.market.sigma_f = 0.0;
  p.market.sigma_p = 0.0;
  return p;
}

// Exhaustive search over moves between the levels {0, 0.5, 1}.
double brute_force(const StorageParams& p) {
  const double levels[3] = {0.0, 0.5, 1.0};
  const double dt = p.horizon / static_cast<double>(p.steps);
  double best = -1e300;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      for (int c = 0; c < 3; ++c) {
        const double path[4] = {p.x0, levels[a], levels[b], levels[c]};
        double gain = 0.0;
        bool ok = true;
        for (int i = 0; i < 3; ++i) {
          const double move = (path[i + 1] - path[i]) / dt;
          ok = ok && move >= p.a_lo && move <= p.a_hi;
          const double sold = p.p0 - move;
          gain += (dynamics::forward_curve(p.market, i * dt) - p.theta * sold) * sold * dt;
        }
        if (ok) best = std::max(best, gain);
      }
  return best;
}

}  // namespace

TEST_CASE("grid DP matches exhaustive search on a deterministic toy") {
  const auto p = toy_storage();
  const double expected = brute_force(p);
  DpGrid g;
  g.x_nodes = 3;
  g.p_nodes = 41;
  CHECK(storage_dp_reference(p, g).value == doctest::Approx(expected).epsilon(1e-9));
  const auto cmd = storage_deterministic_command(p, 3);
  CHECK(storage_skeleton_gain(p, cmd) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("grid DP without storage and price impact reduces to a sum over the forward curve") {
  auto p = storage_desk_params();
  p.x_max = 0.0;
  p.x0 = 0.0;
  p.theta = 0.0;
  p.market.sigma_p = 0.0;
  const double dt = p.horizon / static_cast<double>(p.steps);
  const auto& m = p.market;
  double expected = 0.0;
  for (std::size_t i = 0; i < p.steps; ++i) {
    const double mean_p = m.phi * m.p_max + (p.p0 - m.phi * m.p_max) * std::pow(1.0 - m.iota * dt, i);
    expected += dynamics::forward_curve(m, i * dt) * mean_p * dt;
  }
  CHECK(storage_dp_reference(p).value == doctest::Approx(expected).epsilon(5e-3));
}

TEST_CASE("DP refinement reports its levels") {
  const auto p = toy_storage();
  DpGrid g;
  g.x_nodes = 3;
  g.p_nodes = 11;
  const auto r = storage_dp_refinement(p, g, 2);
  REQUIRE(r.levels.size() == 2);
  CHECK(r.levels[1].grid.x_nodes == 5);
  CHECK(r.value == r.levels[1].value);
  CHECK(r.value >= r.levels[0].value - 1e-12);
}

TEST_CASE("storage DP requires full production correlation") {
  auto p = toy_storage();
  p.market.rho = 0.5;
  CHECK_THROWS_AS(storage_dp_reference(p), ConfigError);
}

TEST_CASE("registry") {
  const auto& ids = list_benchmarks();
  CHECK(ids.size() == 5);
  for (const auto& b : ids) {
    const auto spec = build_problem(b.id);
    CHECK_NOTHROW(spec.validate());
  }
  CHECK(build_problem("storage").sense == dynamics::Sense::maximize);
  CHECK(build_problem("mv-dual").sense == dynamics::Sense::minimize);
  CHECK_THROWS_AS(default_params("nope", Scale::desk), ConfigError);
  CHECK(oracle(default_params("mv-dual", Scale::desk)).value == doctest::Approx(-1.05041).epsilon(1e-5));
  CHECK(oracle(default_params("mv-primal", Scale::desk)).value == doctest::Approx(-1.05041).epsilon(1e-4));
  CHECK(scale_from_string("paper") == Scale::paper);
  CHECK_THROWS_AS(scale_from_string("huge"), ConfigError);
}
