#include "mfls/benchmarks/markowitz.hpp"

#include "mfls/util/error.hpp"

namespace mfls::benchmarks {

void MeanVarianceParams::validate() const {
  if (!(sigma > 0.0)) throw ConfigError("mean-variance: sigma must be positive");
  if (!(lambda > 0.0)) throw ConfigError("mean-variance: lambda must be positive");
  if (!(horizon > 0.0)) throw ConfigError("mean-variance: horizon must be positive");
  if (common > 1) throw ConfigError("mean-variance: at most one common noise coordinate");
  if (variant == MeanVarianceVariant::primal && !(vartheta > 0.0))
    throw ConfigError("mean-variance: the variance budget must be positive");
}

namespace {

double sharpe_growth(const MeanVarianceParams& p) {
  return std::exp(p.r * p.r * p.horizon / (p.sigma * p.sigma));
}

}  // namespace

double markowitz_analytic_value(const MeanVarianceParams& p) {
  p.validate();
  return -p.x0 - (sharpe_growth(p) - 1.0) / (4.0 * p.lambda);
}

double markowitz_matching_variance(const MeanVarianceParams& p) {
  p.validate();
  return (sharpe_growth(p) - 1.0) / (4.0 * p.lambda * p.lambda);
}

MarkowitzFeedback markowitz_analytic_control(const MeanVarianceParams& p) {
  p.validate();
  return {p.r / (p.sigma * p.sigma), p.x0 + sharpe_growth(p) / (2.0 * p.lambda)};
}

double markowitz_primal_value(const MeanVarianceParams& p) {
  p.validate();
  return -(p.x0 + std::sqrt(p.vartheta * (sharpe_growth(p) - 1.0)));
}

dynamics::ProblemSpec make_markowitz_problem(const MeanVarianceParams& p, std::size_t steps) {
  p.validate();
  MarkowitzCoeffs c;
  c.r = p.r;
  c.sigma = p.sigma;
  c.sigma0 = p.sigma0;
  c.lambda = p.lambda;
  c.common = p.common;
  c.objective = p.variant == MeanVarianceVariant::primal ? MarkowitzObjective::mean
                                                         : MarkowitzObjective::mean_variance;
  dynamics::ProblemSpec spec;
  spec.dynamics = std::make_shared<MarkowitzModel>(dynamics::EulerModel<MarkowitzCoeffs>(c));
  spec.horizon = p.horizon;
  spec.steps = steps;
  const double x0 = p.x0;
  spec.initial = [x0](Engine&, std::span<double> x) { x[0] = x0; };
  spec.state_center = {p.x0 + 0.1};
  spec.state_scale = {0.25};
  switch (p.variant) {
    case MeanVarianceVariant::dual:
      spec.name = "mv-dual";
      break;
    case MeanVarianceVariant::tail_constrained:
      spec.name = "mv-constrained";
      spec.constraints.push_back(constraints::ConstraintSpec::tail(p.theta, p.delta));
      break;
    case MeanVarianceVariant::primal:
      spec.name = "mv-primal";
      spec.terminal_constraint = constraints::ConstraintSpec::variance_cap(p.vartheta);
      break;
  }
  spec.validate();
  return spec;
}

}  // namespace mfls::benchmarks
