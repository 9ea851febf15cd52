#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <vector>

#include "doctest.h"
#include "mfls/benchmarks/markowitz.hpp"
#include "mfls/benchmarks/registry.hpp"
#include "mfls/levelset/checkpoint.hpp"
#include "mfls/levelset/curve.hpp"
#include "mfls/levelset/engine.hpp"
#include "mfls/levelset/loss.hpp"
#include "mfls/levelset/recover.hpp"
#include "mfls/levelset/train.hpp"
#include "mfls/util/error.hpp"

using namespace mfls;
using namespace mfls::levelset;

namespace {

Architecture small_arch() {
  Architecture a;
  a.hidden = {6, 5};
  return a;
}

// Random parameters with a larger spread than the default initialization.
void scramble(PolicySet& set, std::uint64_t seed, double spread = 0.5) {
  auto flat = set.flatten();
  Engine eng(seed);
  std::uniform_real_distribution<double> u(-spread, spread);
  for (auto& v : flat) v = u(eng);
  set.unflatten(flat);
}

dynamics::ProblemSpec common_markowitz() {
  benchmarks::MeanVarianceParams p;
  p.sigma0 = 0.2;
  p.common = 1;
  return benchmarks::make_markowitz_problem(p, 8);
}

}  // namespace

TEST_CASE("batched loss equals the serial reference") {
  for (const char* id : {"mv-dual", "mv-constrained", "storage"}) {
    CAPTURE(id);
    const auto spec = benchmarks::build_problem(id);
    auto pol = PolicySet::build(spec, small_arch(), false, 3);
    scramble(pol, 4, 0.3);
    const auto noise = dynamics::NoisePlan::generate(spec, 3, 37, 5, "t");
    EngineOptions opt;
    opt.penalty = {constraints::PenaltyKind::integral, 50.0};
    opt.parallel = false;
    const AuxiliaryEngine engine(spec, opt);
    const std::vector<double> z{-1.0, 0.5, spec.sign() * 45.0};
    const auto res = engine.evaluate(pol, z, noise);
    for (std::size_t g = 0; g < 3; ++g) {
      const auto ref = auxiliary_loss_group(spec, pol, z[g], noise, g, opt.penalty);
      CHECK(res.groups[g].loss == doctest::Approx(ref.loss).epsilon(1e-10));
      CHECK(res.groups[g].z_final == doctest::Approx(ref.z_final).epsilon(1e-10).scale(1e-10));
      CHECK(res.groups[g].penalty == doctest::Approx(ref.penalty).epsilon(1e-10).scale(1e-12));
    }
  }
}

TEST_CASE("serial and OpenMP engine runs agree bit for bit") {
  const auto spec = benchmarks::build_problem("storage");
  auto pol = PolicySet::build(spec, small_arch(), false, 3);
  const auto noise = dynamics::NoisePlan::generate(spec, 4, 200, 5, "t");
  EngineOptions opt;
  opt.penalty = {constraints::PenaltyKind::integral, 1e4};
  const std::vector<double> z(4, -40.0);
  std::vector<double> g1(pol.parameter_count()), g2(pol.parameter_count());
  opt.parallel = false;
  const auto a = AuxiliaryEngine(spec, opt).gradient(pol, z, noise, g1);
  opt.parallel = true;
  const auto b = AuxiliaryEngine(spec, opt).gradient(pol, z, noise, g2);
  CHECK(a.loss == b.loss);
  CHECK(g1 == g2);
}

TEST_CASE("engine gradient matches central differences") {
  const auto spec = benchmarks::build_problem("mv-dual");
  auto pol = PolicySet::build(spec, small_arch(), false, 8);
  scramble(pol, 9, 0.3);
  const auto noise = dynamics::NoisePlan::generate(spec, 2, 32, 5, "t");
  EngineOptions opt;
  const AuxiliaryEngine engine(spec, opt);
  const std::vector<double> z{-3.0, -3.0};
  std::vector<double> grad(pol.parameter_count());
  engine.gradient(pol, z, noise, grad);
  const auto flat = pol.flatten();
  for (std::size_t k = 0; k < flat.size(); k += 17) {
    auto p = flat, m = flat;
    const double h = 1e-4;
    p[k] += h;
    m[k] -= h;
    PolicySet pp = pol, pm = pol;
    pp.unflatten(p);
    pm.unflatten(m);
    const double fd = (engine.evaluate(pp, z, noise).loss - engine.evaluate(pm, z, noise).loss) / (2 * h);
    CHECK(std::abs(grad[k] - fd) <= 1e-5 * std::abs(fd) + 1e-9);
  }
}

TEST_CASE("forward-only and gradient runs report the same loss with the baseline variate") {
  const auto spec = benchmarks::build_problem("storage");
  auto pol = PolicySet::build(spec, small_arch(), false, 3);
  const auto noise = dynamics::NoisePlan::generate(spec, 6, 1, 5, "t");
  EngineOptions opt;
  opt.penalty = {constraints::PenaltyKind::integral, 1e4};
  opt.use_baseline = true;
  opt.baseline_mean = -40.0;
  const AuxiliaryEngine engine(spec, opt);
  const std::vector<double> z(6, -45.0);
  std::vector<double> grad(pol.parameter_count());
  const auto a = engine.evaluate(pol, z, noise);
  const auto b = engine.gradient(pol, z, noise, grad);
  CHECK(a.loss == b.loss);
  for (std::size_t g = 0; g < 6; ++g) CHECK(a.groups[g].z_final == b.groups[g].z_final);
}

TEST_CASE("zero common-noise inputs reproduce the plain policy exactly") {
  const auto spec = common_markowitz();
  auto plain = PolicySet::build(spec, small_arch(), false, 11);
  scramble(plain, 12, 0.4);
  const auto lifted = plain.with_zero_common(1, small_arch());
  const auto noise = dynamics::NoisePlan::generate(spec, 5, 40, 13, "t");
  EngineOptions opt;
  const std::vector<double> z{-1.2, -1.1, -1.0, -0.9, -0.8};
  const auto a = AuxiliaryEngine(spec, opt).evaluate(plain, z, noise);
  opt.common = true;
  const auto b = AuxiliaryEngine(spec, opt).evaluate(lifted, z, noise);
  CHECK(a.loss == b.loss);
  for (std::size_t g = 0; g < z.size(); ++g) CHECK(a.groups[g].z_final == b.groups[g].z_final);
  for (std::size_t g = 0; g < z.size(); ++g)
    CHECK(auxiliary_loss_common(z[g], lifted, noise, spec, opt.penalty) ==
          doctest::Approx(auxiliary_loss(z[g], plain, noise, spec, opt.penalty)).epsilon(1e-12));
}

TEST_CASE("trivial problem has loss (-z)_+") {
  const auto spec = benchmarks::build_problem("trivial");
  const auto pol = PolicySet::build(spec, small_arch(), false, 1);
  EngineOptions opt;
  const auto grid = regular_grid(-1.0, 1.0, 9);
  const auto curve = evaluate_curve(spec, pol, opt, grid, 1e-8, 8, 2, 2, 3);
  for (std::size_t m = 0; m < grid.size(); ++m) CHECK(curve.w[m] == std::max(0.0, -grid[m]));
  REQUIRE(curve.value);
  CHECK(*curve.value == 0.0);
}

TEST_CASE("epsilon extractor") {
  LevelSetCurve c;
  c.z = {0, 1, 2, 3};
  c.w = {0.5, 0.2, 0.0, 0.0};
  c.stderr_.assign(4, 0.0);
  CHECK(extract_value(c, 1e-8) == 2.0);
  c.w = {0.5, 0.2, 0.1, 0.05};
  CHECK_FALSE(extract_value(c, 1e-8).has_value());
  c.sense = dynamics::Sense::maximize;
  c.w = {0.0, 0.0, 0.2, 0.5};
  CHECK(extract_value(c, 1e-8) == 1.0);
}

TEST_CASE("affine extractor recovers the kink of a hinge") {
  LevelSetCurve c;
  c.z = regular_grid(0.0, 3.0, 31);
  for (double z : c.z) c.w.push_back(std::max(0.0, 2.3 - z));
  c.stderr_.assign(c.z.size(), 0.0);
  const auto fit = extract_value_affine(c);
  CHECK(fit.root == doctest::Approx(2.3).epsilon(1e-12));
  CHECK(fit.slope == doctest::Approx(-1.0).epsilon(1e-12));
  c.w.assign(c.z.size(), 0.0);
  c.w[0] = 1.0;
  CHECK_THROWS_AS(extract_value_affine(c), UndefinedValueError);
}

TEST_CASE("regular grid") {
  const auto g = regular_grid(-2.0, 2.0, 5);
  CHECK(g == std::vector<double>{-2.0, -1.0, 0.0, 1.0, 2.0});
}

TEST_CASE("checkpoint round trip") {
  const auto spec = benchmarks::build_problem("storage");
  auto pol = PolicySet::build(spec, small_arch(), false, 21);
  scramble(pol, 22);
  const auto path = (std::filesystem::temp_directory_path() / "mfls_ckpt_test.json").string();
  save_checkpoint(path, pol, {{"value", 45.5}});
  nlohmann::json meta;
  const auto back = load_checkpoint(path, &meta);
  std::remove(path.c_str());
  CHECK(back.flatten() == pol.flatten());
  CHECK(meta["value"] == 45.5);
  const NetworkLaw la(pol), lb(back);
  const std::vector<double> x{0.3, 0.1, 31.0};
  double a1 = 0, a2 = 0;
  la.control(2, 2.0, x, -44.0, {}, std::span<double>(&a1, 1));
  lb.control(2, 2.0, x, -44.0, {}, std::span<double>(&a2, 1));
  CHECK(a1 == a2);
  CHECK(a1 >= -0.2);
  CHECK(a1 <= 0.2);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/ckpt.json"), ConfigError);
  CHECK_THROWS_AS(policies_from_json(nlohmann::json{{"format", "other"}}), ConfigError);
}

TEST_CASE("recovery needs a value") {
  const auto spec = benchmarks::build_problem("mv-dual");
  const auto pol = PolicySet::build(spec, small_arch(), false, 1);
  CHECK_THROWS_AS(recover_control(pol, std::nullopt, spec), UndefinedValueError);
  const auto rc = recover_control(pol, -1.05, spec);
  CHECK(rc.value == -1.05);
  CHECK(rc.internal_z == -1.05);
}
