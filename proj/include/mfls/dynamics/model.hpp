#pragma once

// Particle models. A model describes one time step of a single particle given
// the group-level mean-field features m = (1/N) sum_j phi(x_j, a_j):
//
//   x_next = transition(t, x, a, m, dW, dW0),   f = running cost rate,
//
// and a terminal cost G((1/N) sum_j psi(x_j)). Models are written once as
// templates over the scalar type; ModelDynamics instantiates them with double
// for values and with ad::Dual for the local Jacobians used by the backward pass.
//
// Lane arrays are structure-of-arrays: coordinate k of lane p is at ptr[k * stride + p].

#include <algorithm>
#include <cstddef>
#include <string>

#include "mfls/ad/dual.hpp"
#include "mfls/util/error.hpp"

namespace mfls::dynamics {

struct ModelDims {
  std::size_t state = 1;              // d
  std::size_t control = 1;            // q
  std::size_t noise = 1;              // idiosyncratic Brownian coordinates
  std::size_t common = 0;             // p, common Brownian coordinates
  std::size_t features = 0;           // mean-field features of (x, a)
  std::size_t terminal_features = 0;  // features entering the terminal cost
};

struct StepContext {
  std::size_t step = 0;
  double t = 0.0;
  double dt = 0.0;
};

class Dynamics {
 public:
  virtual ~Dynamics() = default;

  virtual ModelDims dims() const = 0;
  virtual std::string name() const = 0;

  virtual void features(const StepContext& ctx, std::size_t n, std::size_t stride, const double* x,
                        const double* a, double* phi) const = 0;
  /// `m` and `dw0` are given per lane (lanes of one group carry identical values).
  virtual void transition(const StepContext& ctx, std::size_t n, std::size_t stride,
                          const double* x, const double* a, const double* m, const double* dw,
                          const double* dw0, double* x_next, double* cost) const = 0;
  /// Pulls back x_next_bar and the running-cost weight cost_bar (one scalar per
  /// lane) to x_bar, a_bar (overwritten) and m_bar (overwritten, per lane).
  virtual void transition_vjp(const StepContext& ctx, std::size_t n, std::size_t stride,
                              const double* x, const double* a, const double* m, const double* dw,
                              const double* dw0, const double* x_next_bar, const double* cost_bar,
                              double* x_bar, double* a_bar, double* m_bar) const = 0;
  /// Adds phi_bar . d phi / d(x, a) to x_bar and a_bar.
  virtual void features_vjp(const StepContext& ctx, std::size_t n, std::size_t stride,
                            const double* x, const double* a, const double* phi_bar, double* x_bar,
                            double* a_bar) const = 0;

  virtual void terminal_features(std::size_t n, std::size_t stride, const double* x,
                                 double* psi) const = 0;
  virtual void terminal_features_vjp(std::size_t n, std::size_t stride, const double* x,
                                     const double* psi_bar, double* x_bar) const = 0;
  /// G(mean psi); writes dG/d(mean psi) into `grad` when it is not null.
  virtual double terminal_cost(const double* mean_psi, double* grad) const = 0;
};

/// Adapter from a templated model to the Dynamics interface.
///
/// A Model provides:
///   ModelDims dims() const;  std::string name() const;
///   template <class T> void features(const StepContext&, const T* x, const T* a, T* phi) const;
///   template <class T> void transition(const StepContext&, const T* x, const T* a, const T* m,
///                                      const double* dw, const double* dw0, T* x_next, T& cost) const;
///   template <class T> void terminal_features(const T* x, T* psi) const;
///   double terminal_cost(const double* mean_psi, double* grad) const;
template <class Model>
class ModelDynamics final : public Dynamics {
 public:
  static constexpr std::size_t kMax = 8;

  explicit ModelDynamics(Model model) : model_(std::move(model)), dims_(model_.dims()) {
    if (dims_.state + dims_.control + dims_.features > ad::kTangents)
      throw DimensionError("model has more differentiable inputs than tangent slots");
    if (dims_.state > kMax || dims_.control > kMax || dims_.noise > kMax || dims_.common > kMax ||
        dims_.features > kMax || dims_.terminal_features > kMax)
      throw DimensionError("model dimension exceeds the per-particle limit of 8");
  }

  const Model& model() const noexcept { return model_; }
  ModelDims dims() const override { return dims_; }
  std::string name() const override { return model_.name(); }

  void features(const StepContext& ctx, std::size_t n, std::size_t stride, const double* x,
                const double* a, double* phi) const override {
    if (dims_.features == 0) return;
    double xl[kMax], al[kMax], pl[kMax];
    for (std::size_t p = 0; p < n; ++p) {
      gather(x, dims_.state, stride, p, xl);
      gather(a, dims_.control, stride, p, al);
      model_.features(ctx, xl, al, pl);
      scatter(pl, dims_.features, stride, p, phi);
    }
  }

  void transition(const StepContext& ctx, std::size_t n, std::size_t stride, const double* x,
                  const double* a, const double* m, const double* dw, const double* dw0,
                  double* x_next, double* cost) const override {
    double xl[kMax], al[kMax], ml[kMax], wl[kMax], w0l[kMax], xn[kMax];
    for (std::size_t p = 0; p < n; ++p) {
      gather(x, dims_.state, stride, p, xl);
      gather(a, dims_.control, stride, p, al);
      gather(m, dims_.features, stride, p, ml);
      gather(dw, dims_.noise, stride, p, wl);
      gather(dw0, dims_.common, stride, p, w0l);
      double c = 0.0;
      model_.transition(ctx, xl, al, ml, wl, w0l, xn, c);
      scatter(xn, dims_.state, stride, p, x_next);
      cost[p] = c;
    }
  }

  void transition_vjp(const StepContext& ctx, std::size_t n, std::size_t stride, const double* x,
                      const double* a, const double* m, const double* dw, const double* dw0,
                      const double* x_next_bar, const double* cost_bar, double* x_bar,
                      double* a_bar, double* m_bar) const override {
    const std::size_t d = dims_.state, q = dims_.control, nf = dims_.features;
    ad::Dual xl[kMax], al[kMax], ml[kMax], xn[kMax];
    double wl[kMax], w0l[kMax];
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t k = 0; k < d; ++k) xl[k] = ad::Dual::variable(x[k * stride + p], k);
      for (std::size_t k = 0; k < q; ++k) al[k] = ad::Dual::variable(a[k * stride + p], d + k);
      for (std::size_t k = 0; k < nf; ++k) ml[k] = ad::Dual::variable(m[k * stride + p], d + q + k);
      gather(dw, dims_.noise, stride, p, wl);
      gather(dw0, dims_.common, stride, p, w0l);
      ad::Dual c;
      model_.transition(ctx, xl, al, ml, wl, w0l, xn, c);
      double seed[ad::kTangents] = {};
      const double cb = cost_bar[p];
      for (std::size_t s = 0; s < d + q + nf; ++s) seed[s] = cb * c.d[s];
      for (std::size_t r = 0; r < d; ++r) {
        const double xb = x_next_bar[r * stride + p];
        if (xb == 0.0) continue;
        for (std::size_t s = 0; s < d + q + nf; ++s) seed[s] += xb * xn[r].d[s];
      }
      for (std::size_t k = 0; k < d; ++k) x_bar[k * stride + p] = seed[k];
      for (std::size_t k = 0; k < q; ++k) a_bar[k * stride + p] = seed[d + k];
      for (std::size_t k = 0; k < nf; ++k) m_bar[k * stride + p] = seed[d + q + k];
    }
  }

  void features_vjp(const StepContext& ctx, std::size_t n, std::size_t stride, const double* x,
                    const double* a, const double* phi_bar, double* x_bar,
                    double* a_bar) const override {
    const std::size_t d = dims_.state, q = dims_.control, nf = dims_.features;
    if (nf == 0) return;
    ad::Dual xl[kMax], al[kMax], pl[kMax];
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t k = 0; k < d; ++k) xl[k] = ad::Dual::variable(x[k * stride + p], k);
      for (std::size_t k = 0; k < q; ++k) al[k] = ad::Dual::variable(a[k * stride + p], d + k);
      model_.features(ctx, xl, al, pl);
      for (std::size_t r = 0; r < nf; ++r) {
        const double pb = phi_bar[r * stride + p];
        if (pb == 0.0) continue;
        for (std::size_t k = 0; k < d; ++k) x_bar[k * stride + p] += pb * pl[r].d[k];
        for (std::size_t k = 0; k < q; ++k) a_bar[k * stride + p] += pb * pl[r].d[d + k];
      }
    }
  }

  void terminal_features(std::size_t n, std::size_t stride, const double* x,
                         double* psi) const override {
    double xl[kMax], pl[kMax];
    for (std::size_t p = 0; p < n; ++p) {
      gather(x, dims_.state, stride, p, xl);
      model_.terminal_features(xl, pl);
      scatter(pl, dims_.terminal_features, stride, p, psi);
    }
  }

  void terminal_features_vjp(std::size_t n, std::size_t stride, const double* x,
                             const double* psi_bar, double* x_bar) const override {
    const std::size_t d = dims_.state, nt = dims_.terminal_features;
    ad::Dual xl[kMax], pl[kMax];
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t k = 0; k < d; ++k) xl[k] = ad::Dual::variable(x[k * stride + p], k);
      model_.terminal_features(xl, pl);
      for (std::size_t r = 0; r < nt; ++r) {
        const double pb = psi_bar[r * stride + p];
        if (pb == 0.0) continue;
        for (std::size_t k = 0; k < d; ++k) x_bar[k * stride + p] += pb * pl[r].d[k];
      }
    }
  }

  double terminal_cost(const double* mean_psi, double* grad) const override {
    return model_.terminal_cost(mean_psi, grad);
  }

 private:
  static void gather(const double* src, std::size_t dim, std::size_t stride, std::size_t p,
                     double* dst) {
    for (std::size_t k = 0; k < dim; ++k) dst[k] = src[k * stride + p];
  }
  static void scatter(const double* src, std::size_t dim, std::size_t stride, std::size_t p,
                      double* dst) {
    for (std::size_t k = 0; k < dim; ++k) dst[k * stride + p] = src[k];
  }

  Model model_;
  ModelDims dims_;
};

/// Euler-Maruyama transition built from coefficient templates:
///   x_next = x + b dt + sigma dW + sigma0 dW0,  cost = f.
///
/// Coeffs provides (for T = double and ad::Dual):
///   drift(ctx, x, a, m, T* b)            b: state
///   diffusion(ctx, x, a, m, T* s)        s: state x noise, row-major
///   common_diffusion(ctx, x, a, m, T* s) s: state x common, row-major
///   T running_cost(ctx, x, a, m)
/// and the non-step members of the Model contract (dims, name, features,
/// terminal_features, terminal_cost).
template <class Coeffs>
struct EulerModel : Coeffs {
  using Coeffs::Coeffs;
  explicit EulerModel(Coeffs c) : Coeffs(std::move(c)) {}

  template <class T>
  void transition(const StepContext& ctx, const T* x, const T* a, const T* m, const double* dw,
                  const double* dw0, T* x_next, T& cost) const {
    const ModelDims dm = this->dims();
    T b[8], s[64];
    this->drift(ctx, x, a, m, b);
    for (std::size_t k = 0; k < dm.state; ++k) x_next[k] = x[k] + b[k] * ctx.dt;
    if (dm.noise > 0) {
      std::fill_n(s, dm.state * dm.noise, T(0.0));
      this->diffusion(ctx, x, a, m, s);
      for (std::size_t k = 0; k < dm.state; ++k)
        for (std::size_t r = 0; r < dm.noise; ++r) x_next[k] += s[k * dm.noise + r] * dw[r];
    }
    if (dm.common > 0) {
      std::fill_n(s, dm.state * dm.common, T(0.0));
      this->common_diffusion(ctx, x, a, m, s);
      for (std::size_t k = 0; k < dm.state; ++k)
        for (std::size_t r = 0; r < dm.common; ++r) x_next[k] += s[k * dm.common + r] * dw0[r];
    }
    cost = this->running_cost(ctx, x, a, m);
  }
};

}  // namespace mfls::dynamics
