#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "doctest.h"
#include "mfls/measures/empirical.hpp"

using namespace mfls::measures;

namespace {

// Minimum over all couplings (permutations) of the mean squared distance.
double brute_w2(const std::vector<double>& x, std::vector<double> y) {
  std::sort(y.begin(), y.end());
  double best = INFINITY;
  do {
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) s += (x[j] - y[j]) * (x[j] - y[j]);
    best = std::min(best, s / static_cast<double>(x.size()));
  } while (std::next_permutation(y.begin(), y.end()));
  return std::sqrt(best);
}

}  // namespace

TEST_CASE("mean and population variance") {
  const std::vector<double> a{1, 1, 1}, b{0, 2};
  CHECK(mean(a) == 1.0);
  CHECK(variance(a) == 0.0);
  CHECK(mean(b) == 1.0);
  CHECK(variance(b) == 1.0);
  const EmpiricalMeasure mu({0, 10, 2, 20}, 2);
  CHECK(mean(mu) == std::vector<double>{1, 15});
  CHECK(variance(mu) == std::vector<double>{1, 25});
}

TEST_CASE("tail conditional examples") {
  CHECK(tail_conditional(std::vector<double>{1.0, 1.2}, 0.9, 0.8) == 0.0);
  CHECK(tail_conditional(std::vector<double>{0.5, 1.0, 1.5}, 0.9, 0.8) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(tail_conditional(std::vector<double>{0.7, 0.9}, 0.9, 0.8) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("tail conditional is nonpositive when the tail sits above delta") {
  std::mt19937_64 eng(1);
  std::uniform_real_distribution<double> u(0.8, 2.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> x(7);
    for (auto& v : x) v = u(eng);
    CHECK(tail_conditional(x, 0.9, 0.8) <= 0.0);
  }
}

TEST_CASE("wasserstein examples") {
  const std::vector<double> a{0.3, -1.0, 2.0};
  CHECK(wasserstein2_1d(a, a) == 0.0);
  CHECK(wasserstein2_1d(std::vector<double>{0.0}, std::vector<double>{1.0}) == 1.0);
  CHECK(wasserstein2_1d(std::vector<double>{0.0, 1.0}, std::vector<double>{1.0, 2.0}) == 1.0);
}

TEST_CASE("wasserstein equals brute-force optimal coupling and is a metric") {
  std::mt19937_64 eng(42);
  std::normal_distribution<double> nd;
  std::uniform_int_distribution<int> size(1, 8);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = static_cast<std::size_t>(size(eng));
    std::vector<double> x(n), y(n), z(n);
    for (std::size_t j = 0; j < n; ++j) {
      x[j] = nd(eng);
      y[j] = 2.0 * nd(eng) + 0.5;
      z[j] = nd(eng) - 1.0;
    }
    const double w = wasserstein2_1d(x, y);
    CHECK(w == doctest::Approx(brute_w2(x, y)).epsilon(1e-12));
    CHECK(w == doctest::Approx(wasserstein2_1d(y, x)).epsilon(1e-15));
    CHECK(w <= wasserstein2_1d(x, z) + wasserstein2_1d(z, y) + 1e-12);
  }
}

TEST_CASE("squared excursion examples") {
  CHECK(squared_excursion(std::vector<double>{0.0, 0.4, 1.0}, 0.0, 1.0) == 0.0);
  CHECK(squared_excursion(std::vector<double>{-0.1, 0.5, 1.2}, 0.0, 1.0) == doctest::Approx(0.05 / 3).epsilon(1e-14));
  CHECK(squared_excursion(std::vector<double>{2.0}, 0.0, 1.0) == 1.0);
}
