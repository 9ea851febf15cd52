#pragma once

// Continuous-time mean-variance portfolio: dX = a r dt + a sigma dW (+ a sigma0 dW0),
// X_0 = x0, controls unbounded.

#include <cmath>
#include <cstddef>
#include <memory>
#include <string>

#include "mfls/dynamics/model.hpp"
#include "mfls/dynamics/problem.hpp"

namespace mfls::benchmarks {

enum class MeanVarianceVariant { dual, tail_constrained, primal };

struct MeanVarianceParams {
  double r = 0.15;
  double sigma = 0.35;
  double lambda = 1.0;
  double horizon = 1.0;
  double x0 = 1.0;
  MeanVarianceVariant variant = MeanVarianceVariant::dual;
  double theta = 0.9;      // tail level
  double delta = 0.8;      // tail floor on E[X | X <= theta]
  double vartheta = 0.0504;  // primal variance budget
  /// Common-noise volatility and dimension (0 or 1); only used by the
  /// degeneration check; the benchmark problems have no common noise.
  double sigma0 = 0.0;
  std::size_t common = 0;

  void validate() const;
};

/// Terminal objective of the particle model.
///   mean_variance: psi = (x, x^2), G = lambda (m2 - m1^2) - m1
///   mean:          psi = x,        G = -m1
enum class MarkowitzObjective { mean_variance, mean };

struct MarkowitzCoeffs {
  double r = 0.15, sigma = 0.35, sigma0 = 0.0, lambda = 1.0;
  std::size_t common = 0;
  MarkowitzObjective objective = MarkowitzObjective::mean_variance;

  dynamics::ModelDims dims() const {
    return {1, 1, 1, common, 0, objective == MarkowitzObjective::mean_variance ? 2u : 1u};
  }
  std::string name() const { return "markowitz"; }

  template <class T>
  void drift(const dynamics::StepContext&, const T*, const T* a, const T*, T* b) const {
    b[0] = a[0] * r;
  }
  template <class T>
  void diffusion(const dynamics::StepContext&, const T*, const T* a, const T*, T* s) const {
    s[0] = a[0] * sigma;
  }
  template <class T>
  void common_diffusion(const dynamics::StepContext&, const T*, const T* a, const T*, T* s) const {
    s[0] = a[0] * sigma0;
  }
  template <class T>
  T running_cost(const dynamics::StepContext&, const T*, const T*, const T*) const {
    return T(0.0);
  }
  template <class T>
  void features(const dynamics::StepContext&, const T*, const T*, T*) const {}
  template <class T>
  void terminal_features(const T* x, T* psi) const {
    psi[0] = x[0];
    if (objective == MarkowitzObjective::mean_variance) psi[1] = x[0] * x[0];
  }
  double terminal_cost(const double* m, double* grad) const {
    if (objective == MarkowitzObjective::mean) {
      if (grad) grad[0] = -1.0;
      return -m[0];
    }
    if (grad) {
      grad[0] = -2.0 * lambda * m[0] - 1.0;
      grad[1] = lambda;
    }
    return lambda * (m[1] - m[0] * m[0]) - m[0];
  }
};

using MarkowitzModel = dynamics::ModelDynamics<dynamics::EulerModel<MarkowitzCoeffs>>;

/// V = -x0 - (exp(r^2 T / sigma^2) - 1) / (4 lambda).
double markowitz_analytic_value(const MeanVarianceParams& p);

/// Terminal variance of the unconstrained optimum, (exp(r^2 T / sigma^2) - 1) / (4 lambda^2).
/// It is also the primal budget that corresponds to lambda.
double markowitz_matching_variance(const MeanVarianceParams& p);

/// Optimal feedback a*(t, x) = (r / sigma^2) (c* - x) with c* = x0 + exp(r^2 T / sigma^2) / (2 lambda).
struct MarkowitzFeedback {
  double gain = 0.0;
  double target = 0.0;  // c*
  double operator()(double x) const { return gain * (target - x); }
};
MarkowitzFeedback markowitz_analytic_control(const MeanVarianceParams& p);

/// Optimal primal value -E[X_T] = -(x0 + sqrt(vartheta (exp(r^2 T / sigma^2) - 1))).
double markowitz_primal_value(const MeanVarianceParams& p);

dynamics::ProblemSpec make_markowitz_problem(const MeanVarianceParams& p, std::size_t steps);

}  // namespace mfls::benchmarks
