#pragma once

// Wind production with a battery, sold on a market with linear price impact.
// State (X, P, S): storage level, production, spot. Control a = injection
// rate into the battery, a in [a_lo, a_hi]. Gain rate per particle
//
//   S (P - a) - Theta (P - a) m,   m = conditional mean of P - a,
//
// maximized over [0, T] subject to 0 <= X <= X_max (penalized through the
// squared excursion). Common noises: W0 (production, weight rho) and B0 (price).

#include <cstddef>
#include <string>
#include <vector>

#include "mfls/dynamics/model.hpp"
#include "mfls/dynamics/problem.hpp"
#include "mfls/dynamics/storage_market.hpp"

namespace mfls::benchmarks {

struct StorageParams {
  double horizon = 10.0;
  std::size_t steps = 10;
  double x_max = 1.0;
  double x0 = 0.5;
  double p0 = 0.12;
  double a_lo = -0.2;
  double a_hi = 0.2;
  double theta = 10.0;  // Theta_infinity
  double penalty_weight = 1e4;
  dynamics::StorageMarketParams market;

  void validate() const;
  double s0() const { return dynamics::forward_curve(market, 0.0); }
};

/// Desk scale: T = 10, N_T = 10. Paper scale: T = 40, N_T = 40.
StorageParams storage_desk_params();
StorageParams storage_paper_params();

struct StorageModel {
  StorageParams params;

  dynamics::ModelDims dims() const { return {3, 1, 1, 2, 1, 0}; }
  std::string name() const { return "storage"; }

  template <class T>
  void features(const dynamics::StepContext&, const T* x, const T* a, T* phi) const {
    phi[0] = x[1] - a[0];
  }
  template <class T>
  void transition(const dynamics::StepContext& ctx, const T* x, const T* a, const T* m,
                  const double* dw, const double* dw0, T* x_next, T& cost) const {
    const T sold = x[1] - a[0];
    cost = x[2] * sold - params.theta * sold * m[0];
    x_next[0] = x[0] + a[0] * ctx.dt;
    T production = x[1], spot = x[2];
    dynamics::storage_market_step(params.market, ctx.t, ctx.dt, production, spot, dw0[0], dw0[1],
                                  dw[0]);
    x_next[1] = production;
    x_next[2] = spot;
  }
  template <class T>
  void terminal_features(const T*, T*) const {}
  double terminal_cost(const double*, double*) const { return 0.0; }
};

using StorageDynamics = dynamics::ModelDynamics<StorageModel>;

/// Mean gain of the deterministic skeleton (sigma_f = sigma_p = 0) under a
/// per-step command, and the command that maximizes it. The maximizer moves the
/// storage level on a grid of `levels` points over [0, X_max].
double storage_skeleton_gain(const StorageParams& p, const std::vector<double>& command);
std::vector<double> storage_deterministic_command(const StorageParams& p, std::size_t levels = 201);

/// Maximization problem with the excursion constraint on X and the
/// deterministic command attached as baseline control.
dynamics::ProblemSpec make_storage_problem(const StorageParams& p);

}  // namespace mfls::benchmarks
