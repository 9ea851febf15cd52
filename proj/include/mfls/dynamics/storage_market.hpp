#pragma once

// Exogenous market and production factors of the wind-storage model.
//
// Spot: S_t = F(0,t) exp(E_t - v(t)/2), where E is the Ornstein-Uhlenbeck
// factor dE = -a E dt + sigma_f dB0 and v(t) = sigma_f^2 (1 - e^{-2at}) / (2a).
// E is advanced exactly, so E[S_t] = F(0,t) at every grid time.
//
// Production: one Euler step of
//   dP = iota (phi Pmax - P) dt + sigma_p (P ^ (Pmax - P))_+ (rho dW0 + sqrt(1-rho^2) dW),
// clamped to [0, Pmax] afterwards.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mfls/ad/dual.hpp"
#include "mfls/util/error.hpp"

namespace mfls::dynamics {

struct StorageMarketParams {
  double base = 30.0;
  double amplitude_long = 5.0;
  double period_long = 40.0;
  double amplitude_short = 1.0;
  double period_short = 7.0;
  double sigma_f = 0.3;
  double mean_reversion = 0.16;  // a
  double iota = 0.2;
  double sigma_p = 0.2;
  double phi = 0.3;
  double p_max = 0.2;
  double rho = 1.0;

  void validate() const {
    if (!(sigma_f >= 0.0) || !(mean_reversion >= 0.0) || !(iota >= 0.0) || !(sigma_p >= 0.0))
      throw ConfigError("storage market: volatilities and rates must be nonnegative");
    if (!(p_max > 0.0)) throw ConfigError("storage market: p_max must be positive");
    if (!(rho >= -1.0 && rho <= 1.0)) throw ConfigError("storage market: rho must lie in [-1, 1]");
    if (!(period_long > 0.0) || !(period_short > 0.0))
      throw ConfigError("storage market: forward curve periods must be positive");
  }
};

inline double forward_curve(const StorageMarketParams& p, double t) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  return p.base + p.amplitude_long * std::cos(two_pi * t / p.period_long) +
         p.amplitude_short * std::cos(two_pi * t / p.period_short);
}

/// Variance of E_t started from E_0 = 0.
inline double spot_factor_variance(const StorageMarketParams& p, double t) {
  const double a = p.mean_reversion;
  if (a == 0.0) return p.sigma_f * p.sigma_f * t;
  return p.sigma_f * p.sigma_f * (1.0 - std::exp(-2.0 * a * t)) / (2.0 * a);
}

/// Standard deviation of the exact E-step of length dt.
inline double spot_step_stddev(const StorageMarketParams& p, double dt) {
  return std::sqrt(spot_factor_variance(p, dt));
}

inline double spot_from_factor(const StorageMarketParams& p, double t, double e) {
  return forward_curve(p, t) * std::exp(e - 0.5 * spot_factor_variance(p, t));
}

inline double factor_from_spot(const StorageMarketParams& p, double t, double s) {
  const double f = forward_curve(p, t);
  if (!(f > 0.0)) throw std::domain_error("forward price must be positive");
  return std::log(s / f) + 0.5 * spot_factor_variance(p, t);
}

/// Advances (P, S) from t to t + dt. dw0 drives production (common), db0 the
/// price, dw the idiosyncratic production noise; all are N(0, dt) draws.
template <class T>
void storage_market_step(const StorageMarketParams& p, double t, double dt, T& production, T& spot,
                         double dw0, double db0, double dw) {
  const double f0 = forward_curve(p, t), f1 = forward_curve(p, t + dt);
  if (!(f0 > 0.0) || !(f1 > 0.0) || !(ad::value(spot) > 0.0))
    throw std::domain_error("storage market step needs positive forward and spot prices");
  const double decay = std::exp(-p.mean_reversion * dt);
  const double sd = spot_step_stddev(p, dt);
  const double xi = dt > 0.0 ? db0 / std::sqrt(dt) : 0.0;
  // E_{t+dt} = decay * E_t + sd * xi, with E_t = log(S/F) + v(t)/2.
  using std::log;
  using std::exp;
  using ad::log;
  using ad::exp;
  const T e0 = log(spot / f0) + 0.5 * spot_factor_variance(p, t);
  const T e1 = decay * e0 + sd * xi;
  spot = f1 * exp(e1 - 0.5 * spot_factor_variance(p, t + dt));

  const T room = ad::min(production, T(p.p_max) - production);
  const T vol = p.sigma_p * ad::pos(room);
  const double mix = p.rho * dw0 + std::sqrt(std::max(0.0, 1.0 - p.rho * p.rho)) * dw;
  production = production + p.iota * (p.phi * p.p_max - production) * dt + vol * mix;
  production = ad::clamp(production, 0.0, p.p_max);
}

}  // namespace mfls::dynamics
