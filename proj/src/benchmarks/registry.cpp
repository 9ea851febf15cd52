#include "mfls/benchmarks/registry.hpp"

#include <memory>

#include "mfls/util/error.hpp"

namespace mfls::benchmarks {

namespace {

/// Zero dynamics and costs; the constraint is identically -1.
struct TrivialCoeffs {
  dynamics::ModelDims dims() const { return {1, 1, 1, 0, 0, 0}; }
  std::string name() const { return "trivial"; }
  template <class T>
  void drift(const dynamics::StepContext&, const T*, const T*, const T*, T* b) const {
    b[0] = T(0.0);
  }
  template <class T>
  void diffusion(const dynamics::StepContext&, const T*, const T*, const T*, T* s) const {
    s[0] = T(0.0);
  }
  template <class T>
  void common_diffusion(const dynamics::StepContext&, const T*, const T*, const T*, T*) const {}
  template <class T>
  T running_cost(const dynamics::StepContext&, const T*, const T*, const T*) const {
    return T(0.0);
  }
  template <class T>
  void features(const dynamics::StepContext&, const T*, const T*, T*) const {}
  template <class T>
  void terminal_features(const T*, T*) const {}
  double terminal_cost(const double*, double*) const { return 0.0; }
};

dynamics::ProblemSpec make_trivial_problem(std::size_t steps) {
  dynamics::ProblemSpec spec;
  spec.name = "trivial";
  spec.dynamics =
      std::make_shared<dynamics::ModelDynamics<dynamics::EulerModel<TrivialCoeffs>>>(
          dynamics::EulerModel<TrivialCoeffs>(TrivialCoeffs{}));
  spec.horizon = 1.0;
  spec.steps = steps;
  spec.initial = [](Engine&, std::span<double> x) { x[0] = 0.0; };
  spec.constraints.push_back(constraints::ConstraintSpec::custom(
      [](double, std::span<const double>, std::span<double> grad) {
        std::fill(grad.begin(), grad.end(), 0.0);
        return -1.0;
      }));
  spec.validate();
  return spec;
}

}  // namespace

Scale scale_from_string(const std::string& s) {
  if (s == "desk") return Scale::desk;
  if (s == "paper") return Scale::paper;
  throw ConfigError("unknown scale '" + s + "' (expected desk or paper)");
}

const char* to_string(Scale s) { return s == Scale::desk ? "desk" : "paper"; }

const std::vector<BenchmarkInfo>& list_benchmarks() {
  static const std::vector<BenchmarkInfo> ids = {
      {"mv-dual", "mean-variance, minimize lambda Var(X_T) - E[X_T]"},
      {"mv-constrained", "mean-variance with the tail constraint (0.8 - E[X_t | X_t <= 0.9]) P(X_t <= 0.9) <= 0"},
      {"mv-primal", "maximize E[X_T] subject to Var(X_T) <= 0.0504"},
      {"storage", "wind production with storage and price impact, rho = 1 (maximize)"},
      {"trivial", "zero dynamics and costs, constraint identically -1"},
  };
  return ids;
}

BenchmarkParams default_params(const std::string& id, Scale scale) {
  BenchmarkParams p;
  p.id = id;
  if (id == "mv-dual") {
    p.mv.variant = MeanVarianceVariant::dual;
  } else if (id == "mv-constrained") {
    p.mv.variant = MeanVarianceVariant::tail_constrained;
  } else if (id == "mv-primal") {
    p.mv.variant = MeanVarianceVariant::primal;
    p.mv.vartheta = markowitz_matching_variance(p.mv);
  } else if (id == "storage") {
    p.storage = scale == Scale::desk ? storage_desk_params() : storage_paper_params();
  } else if (id != "trivial") {
    throw ConfigError("unknown benchmark id '" + id + "'");
  }
  return p;
}

dynamics::ProblemSpec build_problem(const BenchmarkParams& p) {
  if (p.id == "mv-dual" || p.id == "mv-constrained" || p.id == "mv-primal")
    return make_markowitz_problem(p.mv, p.mv_steps);
  if (p.id == "storage") return make_storage_problem(p.storage);
  if (p.id == "trivial") return make_trivial_problem(p.trivial_steps);
  throw ConfigError("unknown benchmark id '" + p.id + "'");
}

levelset::TrainConfig default_train_config(const std::string& id, Scale scale) {
  levelset::TrainConfig c;
  const bool paper = scale == Scale::paper;
  if (id == "mv-dual" || id == "mv-constrained" || id == "mv-primal") {
    c.particles = paper ? 20000 : 4096;
    c.iterations = paper ? 15000 : 5000;
    c.arch.hidden = {15, 15};
    c.grid_points = 25;
    c.learning_rate = 1e-3;
    if (id == "mv-dual") {
      c.z_lo = -1.07;
      c.z_hi = -1.03;
    } else if (id == "mv-constrained") {
      c.penalty = {constraints::PenaltyKind::integral, 100.0};
      c.z_lo = paper ? -1.047 : -1.06;
      c.z_hi = paper ? -1.041 : -1.00;
    } else {
      c.penalty = {constraints::PenaltyKind::terminal, 10.0};
      c.z_lo = -1.12;
      c.z_hi = -1.08;
    }
  } else if (id == "storage") {
    c.particles = 1;
    c.groups = paper ? 512 : 256;
    c.eval_particles = 1;
    c.eval_groups = paper ? 8192 : 4096;
    c.iterations = paper ? 50000 : 30000;
    c.learning_rate = 2e-3;
    c.arch.hidden = {14, 14};
    c.common = true;
    c.use_baseline = true;
    c.penalty = {constraints::PenaltyKind::integral, 1e4};
    c.z_lo = paper ? 107.0 : 36.0;
    c.z_hi = paper ? 127.0 : 56.0;
    c.grid_points = 41;
  } else if (id == "trivial") {
    c.particles = 16;
    c.iterations = 0;
    c.z_lo = -2.0;
    c.z_hi = 2.0;
    c.grid_points = 9;
    c.arch.hidden = {4};
  } else {
    throw ConfigError("unknown benchmark id '" + id + "'");
  }
  return c;
}

OracleResult oracle(const BenchmarkParams& p, const DpGrid& grid, std::size_t dp_levels,
                    DpRefinement* study_out) {
  OracleResult r;
  r.id = p.id;
  if (p.id == "mv-dual") {
    r.method = "closed form";
    r.value = markowitz_analytic_value(p.mv);
    const auto fb = markowitz_analytic_control(p.mv);
    r.details = {{"feedback_gain", fb.gain}, {"feedback_target", fb.target},
                 {"terminal_variance", markowitz_matching_variance(p.mv)}};
  } else if (p.id == "mv-primal") {
    r.method = "closed form, lambda * vartheta + primal value";
    const double jbar = markowitz_primal_value(p.mv);
    r.value = p.mv.lambda * p.mv.vartheta + jbar;
    r.details = {{"primal_value", jbar}, {"vartheta", p.mv.vartheta}, {"lambda", p.mv.lambda},
                 {"dual_value", markowitz_analytic_value(p.mv)}};
  } else if (p.id == "storage") {
    const auto study = storage_dp_refinement(p.storage, grid, dp_levels);
    r.method = "grid dynamic programming, Gauss-Hermite 7";
    r.value = study.value;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& l : study.levels)
      rows.push_back({{"x_nodes", l.grid.x_nodes}, {"p_nodes", l.grid.p_nodes}, {"e_nodes", l.grid.e_nodes},
                      {"value", l.value}, {"seconds", l.seconds}});
    r.details = {{"refinement", rows}, {"last_change", study.last_change}, {"monotone", study.monotone},
                 {"converged", study.converged}};
    if (study_out) *study_out = study;
  } else if (p.id == "trivial") {
    r.method = "closed form";
    r.value = 0.0;
  } else {
    throw ConfigError("no oracle for benchmark '" + p.id + "'");
  }
  return r;
}

}  // namespace mfls::benchmarks
