#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "mfls/constraints/constraint.hpp"
#include "mfls/measures/empirical.hpp"
#include "mfls/util/error.hpp"

using namespace mfls;
using namespace mfls::constraints;

namespace {

ConstraintSpec constant(double v) {
  return ConstraintSpec::custom([v](double, std::span<const double>, std::span<double> g) {
    std::fill(g.begin(), g.end(), 0.0);
    return v;
  });
}

const TimePoint kMid{0.5, 1.0};
const TimePoint kEnd{1.0, 1.0};

}  // namespace

TEST_CASE("probability of set at the boundary") {
  const auto c = ConstraintSpec::probability_of_set(0.0, INFINITY, 0.5);
  CHECK(evaluate(c, kMid, std::vector<double>{-1.0, 1.0}) == 0.0);
  CHECK(evaluate(c, kMid, std::vector<double>{-1.0, -1.0}) == 0.5);
}

TEST_CASE("tail constraint delegates to the measure functional") {
  const auto c = ConstraintSpec::tail(0.9, 0.8);
  const std::vector<double> x{0.5, 1.0, 1.5, 0.2};
  CHECK(evaluate(c, kMid, x) == measures::tail_conditional(x, 0.9, 0.8));
}

TEST_CASE("terminal variance cap") {
  const auto c = ConstraintSpec::variance_cap(0.0504);
  // {m - s, m + s} has population variance s^2
  const double s = std::sqrt(0.06);
  CHECK(evaluate(c, kEnd, std::vector<double>{1.0 - s, 1.0 + s}) == doctest::Approx(0.0096).epsilon(1e-12));
}

TEST_CASE("terminal-only and discrete-time wrappers") {
  const auto inner = ConstraintSpec::excursion(0.0, 1.0);
  const std::vector<double> x{2.0};
  const auto term = ConstraintSpec::terminal_only(inner);
  CHECK(evaluate(term, kMid, x) == 0.0);
  CHECK(evaluate(term, kEnd, x) == 1.0);
  const auto at = ConstraintSpec::discrete_times(inner, {0.5});
  CHECK(evaluate(at, kMid, x) == 1.0);
  CHECK(evaluate(at, {0.25, 1.0}, x) == 0.0);
}

TEST_CASE("as-distance and wasserstein ball") {
  const auto d = ConstraintSpec::as_distance(0.0, 1.0);
  CHECK(evaluate(d, kMid, std::vector<double>{-0.5, 0.5, 2.0}) == doctest::Approx(0.5).epsilon(1e-15));
  const auto w = ConstraintSpec::wasserstein_ball({0.0, 1.0}, 0.25);
  CHECK(evaluate(w, kMid, std::vector<double>{1.0, 2.0}) == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("kappa modification") {
  CHECK(evaluate(kappa_modify(constant(0.3), 1.0), kMid, std::vector<double>{0.0}) == 0.3);
  CHECK(evaluate(kappa_modify(constant(0.0), 1.0), kMid, std::vector<double>{0.0}) == -1.0);
  CHECK(evaluate(kappa_modify(constant(-0.2), 0.5), kMid, std::vector<double>{0.0}) == doctest::Approx(-0.7).epsilon(1e-15));
}

TEST_CASE("penalty aggregation examples") {
  const std::vector<double> v{-1.0, 0.3, -0.2};
  CHECK(aggregate_penalty(v, {PenaltyKind::integral, 10.0}, 0.1) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(aggregate_penalty(v, {PenaltyKind::supremum, 1.0}, 0.1) == 0.3);
  const std::vector<double> ok{-1.0, 0.0, -0.2};
  for (auto kind : {PenaltyKind::integral, PenaltyKind::supremum, PenaltyKind::terminal})
    CHECK(aggregate_penalty(ok, {kind, 7.0}, 0.1, -0.5) == 0.0);
  CHECK(aggregate_penalty(ok, {PenaltyKind::terminal, 10.0}, 0.1, 0.2) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("penalty gradient matches differences away from kinks") {
  const std::vector<double> v{-1.0, 0.3, 0.2};
  const PenaltyMode mode{PenaltyKind::integral, 10.0};
  const auto g = aggregate_penalty_gradient(v, mode, 0.1, 0.4);
  CHECK(g.penalty == doctest::Approx(aggregate_penalty(v, mode, 0.1, 0.4)));
  CHECK(g.d_values[0] == 0.0);
  CHECK(g.d_values[1] == doctest::Approx(1.0));
  CHECK(g.d_phi == doctest::Approx(10.0));
  const auto s = aggregate_penalty_gradient(v, {PenaltyKind::supremum, 2.0}, 0.1);
  CHECK(s.d_values[1] == 2.0);
  CHECK(s.d_values[2] == 0.0);
}

TEST_CASE("constraint gradients match central differences") {
  std::mt19937_64 eng(3);
  std::normal_distribution<double> nd(1.0, 0.5);
  std::vector<double> x(40);
  for (auto& v : x) v = nd(eng);
  const std::vector<ConstraintSpec> specs{ConstraintSpec::excursion(0.5, 1.5), ConstraintSpec::variance_cap(0.01),
                                          ConstraintSpec::tail(0.9, 0.8), ConstraintSpec::as_distance(0.2, 1.2),
                                          ConstraintSpec::wasserstein_ball(std::vector<double>(40, 1.0), 0.1)};
  for (const auto& c : specs) {
    std::vector<double> g(x.size());
    evaluate_with_gradient(c, kEnd, x, g);
    for (std::size_t j = 0; j < x.size(); j += 5) {
      auto xp = x, xm = x;
      xp[j] += 1e-6;
      xm[j] -= 1e-6;
      const double fd = (evaluate(c, kEnd, xp) - evaluate(c, kEnd, xm)) / 2e-6;
      CHECK(g[j] == doctest::Approx(fd).epsilon(1e-5).scale(1e-3));
    }
  }
}

TEST_CASE("invalid specs and penalties are rejected") {
  CHECK_THROWS_AS(ConstraintSpec::excursion(1.0, 0.0).validate(), ConfigError);
  CHECK_THROWS_AS(validate_penalty({}, {PenaltyKind::integral, 0.0}), ConfigError);
  const auto pointwise = ConstraintSpec::discrete_times(ConstraintSpec::excursion(0, 1), {0.5});
  CHECK_THROWS_AS(validate_penalty({pointwise}, {PenaltyKind::integral, 1.0}), ConfigError);
  CHECK_THROWS_AS(penalty_kind_from_string("sum"), ConfigError);
}
