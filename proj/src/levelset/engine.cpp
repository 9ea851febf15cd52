#include "mfls/levelset/engine.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <string>

#include "mfls/nn/batch.hpp"
#include "mfls/util/error.hpp"

namespace mfls::levelset {

using nn::kLanes;

namespace {

constexpr std::size_t kChunkBlocks = 8;

/// Captures the first exception thrown inside an OpenMP loop and rethrows it afterwards.
class ParallelGuard {
 public:
  template <class F>
  void run(F&& f) {
    try {
      f();
    } catch (...) {
      std::lock_guard<std::mutex> lock(mu_);
      if (!error_) error_ = std::current_exception();
    }
  }
  void rethrow() {
    if (error_) std::rethrow_exception(error_);
  }

 private:
  std::mutex mu_;
  std::exception_ptr error_;
};

}  // namespace

AuxiliaryEngine::AuxiliaryEngine(const dynamics::ProblemSpec& spec, EngineOptions options)
    : spec_(&spec), opts_(options) {
  spec.validate();
  constraints::validate_penalty(spec.constraints, opts_.penalty);
  if (opts_.common && spec.dims().common == 0)
    throw ConfigError("common-noise evaluation needs a model with common noise");
  if (opts_.use_baseline && spec.baseline_control.empty())
    throw ConfigError("baseline control variate requested but the problem has no baseline command");
}

struct AuxiliaryEngine::Run {
  const dynamics::ProblemSpec& spec;
  const EngineOptions& opts;
  const PolicySet& pol;
  const dynamics::NoisePlan& noise;
  std::span<const double> z;

  dynamics::ModelDims dm;
  std::size_t d, q, nf, nt, p, n_in;
  std::size_t G, N, total, Gn, blocks, chunks, steps;
  dynamics::TimeGrid grid;
  double dt, sign;
  bool keep_history;

  std::vector<double> X;   // history (steps + 1) x d x total, or 2 x d x total
  std::vector<double> Z;   // (steps + 1) x G
  std::vector<double> W0;  // (steps + 1) x p x G
  std::vector<double> a, phi, cost, m, fbar;
  std::vector<double> beta;  // G x p, current step
  std::vector<double> values;             // G x steps, Psi(t_{i+1})
  std::vector<std::size_t> arg;           // G x steps
  std::vector<double> tapes, beta_tapes;
  bool parallel;

  Run(const dynamics::ProblemSpec& s, const EngineOptions& o, const PolicySet& ps,
      const dynamics::NoisePlan& nz, std::span<const double> zz, bool history)
      : spec(s), opts(o), pol(ps), noise(nz), z(zz), dm(s.dims()), grid(s.grid()),
        keep_history(history), parallel(o.parallel) {
    d = dm.state;
    q = dm.control;
    nf = dm.features;
    nt = dm.terminal_features;
    p = dm.common;
    n_in = d + 1 + (opts.common ? p : 0);
    G = z.size();
    N = noise.particles;
    total = G * N;
    Gn = noise.groups;
    steps = spec.steps;
    blocks = (total + kLanes - 1) / kLanes;
    chunks = (blocks + kChunkBlocks - 1) / kChunkBlocks;
    dt = grid.dt();
    sign = spec.sign();
    if (G == 0) throw ConfigError("no z values to evaluate");
    if (noise.steps != steps || noise.state_dim != d || noise.noise_dim != dm.noise ||
        noise.common_dim != p)
      throw DimensionError("noise plan does not match the problem");
    if (pol.steps() != steps) throw DimensionError("one control network per time step is required");
    for (const auto& net : pol.alpha)
      if (net.input_dim() != n_in || net.output_dim() != q)
        throw DimensionError("control network has input " + std::to_string(net.input_dim()) +
                             ", output " + std::to_string(net.output_dim()) + "; expected " +
                             std::to_string(n_in) + ", " + std::to_string(q));
    if (opts.common) {
      if (pol.beta.size() != steps) throw DimensionError("one beta network per time step is required");
      for (const auto& net : pol.beta)
        if (net.input_dim() != 1 + p || net.output_dim() != p)
          throw DimensionError("beta network must map (Z, W0) to p outputs");
    }
    X.assign((history ? steps + 1 : 2) * d * total, 0.0);
    Z.assign((steps + 1) * G, 0.0);
    W0.assign((steps + 1) * p * G, 0.0);
    a.assign(q * total, 0.0);
    phi.assign(nf * total, 0.0);
    cost.assign(total, 0.0);
    m.assign(G * nf, 0.0);
    fbar.assign(G, 0.0);
    beta.assign(G * p, 0.0);
    values.assign(G * steps, 0.0);
    arg.assign(G * steps, 0);
    for (std::size_t g = 0; g < G; ++g) {
      Z[g] = z[g];
      const std::size_t gn = g % Gn;
      for (std::size_t i = 0; i < steps; ++i)
        for (std::size_t k = 0; k < p; ++k)
          W0[((i + 1) * p + k) * G + g] = W0[(i * p + k) * G + g] + noise.dw0_at(i, k, gn);
    }
    double* x0 = Xat(0);
    for (std::size_t k = 0; k < d; ++k)
      for (std::size_t gi = 0; gi < total; ++gi) x0[k * total + gi] = noise.x0[k * noise.total() + nidx(gi)];
  }

  std::size_t nidx(std::size_t gi) const {
    if (Gn == G) return gi;
    const std::size_t g = gi / N, j = gi % N;
    return (g % Gn) * N + j;
  }
  double* Xat(std::size_t i) { return X.data() + (keep_history ? i : i % 2) * d * total; }
  std::size_t lanes(std::size_t b) const { return std::min(kLanes, total - b * kLanes); }

  template <class F>
  void for_blocks(F&& f) {
    ParallelGuard guard;
#pragma omp parallel for schedule(static) if (parallel)
    for (std::size_t b = 0; b < blocks; ++b) guard.run([&] { f(b); });
    guard.rethrow();
  }
  template <class F>
  void for_chunks(F&& f) {
    ParallelGuard guard;
#pragma omp parallel for schedule(static) if (parallel)
    for (std::size_t c = 0; c < chunks; ++c) guard.run([&] { f(c); });
    guard.rethrow();
  }

  // SoA copy of `dim` rows of a (dim x total) array into a (dim x kLanes) block.
  void gather(const double* src, std::size_t dim, std::size_t b, double* dst) const {
    const std::size_t base = b * kLanes, n = lanes(b);
    for (std::size_t k = 0; k < dim; ++k) std::copy_n(src + k * total + base, n, dst + k * kLanes);
  }
  void scatter(const double* src, std::size_t dim, std::size_t b, double* dst) const {
    const std::size_t base = b * kLanes, n = lanes(b);
    for (std::size_t k = 0; k < dim; ++k) std::copy_n(src + k * kLanes, n, dst + k * total + base);
  }
  // Per-lane copy of a (G x dim) group array.
  void broadcast(const double* grp, std::size_t dim, std::size_t b, double* dst) const {
    const std::size_t base = b * kLanes, n = lanes(b);
    for (std::size_t lane = 0; lane < n; ++lane) {
      const std::size_t g = (base + lane) / N;
      for (std::size_t k = 0; k < dim; ++k) dst[k * kLanes + lane] = grp[g * dim + k];
    }
  }
  void noise_block(std::size_t i, std::size_t b, double* dw, double* dw0) const {
    const std::size_t base = b * kLanes, n = lanes(b);
    for (std::size_t k = 0; k < dm.noise; ++k) {
      const double* row = noise.dw_at(i, k);
      for (std::size_t lane = 0; lane < n; ++lane) dw[k * kLanes + lane] = row[nidx(base + lane)];
    }
    for (std::size_t lane = 0; lane < n; ++lane) {
      const std::size_t g = (base + lane) / N;
      for (std::size_t k = 0; k < p; ++k) dw0[k * kLanes + lane] = noise.dw0_at(i, k, g % Gn);
    }
  }
  void network_inputs(std::size_t i, const double* Xi, std::size_t b, double* in) const {
    gather(Xi, d, b, in);
    const std::size_t base = b * kLanes, n = lanes(b);
    for (std::size_t lane = 0; lane < n; ++lane) {
      const std::size_t g = (base + lane) / N;
      in[d * kLanes + lane] = Z[i * G + g];
      if (opts.common)
        for (std::size_t k = 0; k < p; ++k) in[(d + 1 + k) * kLanes + lane] = W0[(i * p + k) * G + g];
    }
  }

  /// Controls and features at step i; keeps network tapes when `store_tapes`.
  void controls(std::size_t i, bool store_tapes) {
    const double* Xi = Xat(i);
    const nn::BatchEvaluator eval(pol.alpha[i]);
    const std::size_t ts = eval.tape_size();
    if (store_tapes) tapes.assign(blocks * ts, 0.0);
    const auto ctx = grid.context(i);
    for_blocks([&](std::size_t b) {
      thread_local std::vector<double> buf;
      buf.resize(ts + (n_in + q + d + nf) * kLanes);
      double* tape = store_tapes ? tapes.data() + b * ts : buf.data();
      double* in = buf.data() + ts;
      double* out = in + n_in * kLanes;
      double* xb = out + q * kLanes;
      double* ph = xb + d * kLanes;
      const std::size_t n = lanes(b);
      network_inputs(i, Xi, b, in);
      eval.forward(in, n, tape, out);
      scatter(out, q, b, a.data());
      if (nf > 0) {
        gather(Xi, d, b, xb);
        spec.dynamics->features(ctx, n, kLanes, xb, out, ph);
        scatter(ph, nf, b, phi.data());
      }
    });
    for (std::size_t k = 0; k < q * total; ++k)
      if (!std::isfinite(a[k])) throw SimulationError(i, k % total, "non-finite control");
    group_means(phi.data(), nf, m.data());
  }

  void group_means(const double* lane_vals, std::size_t dim, double* out) const {
    const double inv = 1.0 / static_cast<double>(N);
    for (std::size_t g = 0; g < G; ++g)
      for (std::size_t k = 0; k < dim; ++k) {
        const double* row = lane_vals + k * total + g * N;
        double s = 0.0;
        for (std::size_t j = 0; j < N; ++j) s += row[j];
        out[g * dim + k] = s * inv;
      }
  }

  void martingale(std::size_t i, bool store_tapes) {
    if (!opts.common) return;
    const nn::BatchEvaluator eval(pol.beta[i]);
    const std::size_t gblocks = (G + kLanes - 1) / kLanes, ts = eval.tape_size();
    if (store_tapes) beta_tapes.assign(gblocks * ts, 0.0);
    std::vector<double> tape(ts), in((1 + p) * kLanes), out(p * kLanes);
    for (std::size_t b = 0; b < gblocks; ++b) {
      const std::size_t n = std::min(kLanes, G - b * kLanes);
      for (std::size_t lane = 0; lane < n; ++lane) {
        const std::size_t g = b * kLanes + lane;
        in[lane] = Z[i * G + g];
        for (std::size_t k = 0; k < p; ++k) in[(1 + k) * kLanes + lane] = W0[(i * p + k) * G + g];
      }
      double* t = store_tapes ? beta_tapes.data() + b * ts : tape.data();
      eval.forward(in.data(), n, t, out.data());
      for (std::size_t lane = 0; lane < n; ++lane)
        for (std::size_t k = 0; k < p; ++k) beta[(b * kLanes + lane) * p + k] = out[k * kLanes + lane];
    }
  }

  void transition(std::size_t i) {
    const double* Xi = Xat(i);
    double* Xn = Xat(i + 1);
    const auto ctx = grid.context(i);
    for_blocks([&](std::size_t b) {
      thread_local std::vector<double> buf;
      buf.resize((2 * d + q + nf + dm.noise + p + 1) * kLanes);
      double* xb = buf.data();
      double* xn = xb + d * kLanes;
      double* ab = xn + d * kLanes;
      double* mb = ab + q * kLanes;
      double* dw = mb + nf * kLanes;
      double* dw0 = dw + dm.noise * kLanes;
      double* cb = dw0 + p * kLanes;
      const std::size_t n = lanes(b);
      gather(Xi, d, b, xb);
      gather(a.data(), q, b, ab);
      broadcast(m.data(), nf, b, mb);
      noise_block(i, b, dw, dw0);
      spec.dynamics->transition(ctx, n, kLanes, xb, ab, mb, dw, dw0, xn, cb);
      scatter(xn, d, b, Xn);
      std::copy_n(cb, n, cost.data() + b * kLanes);
    });
    for (std::size_t k = 0; k < d; ++k)
      for (std::size_t gi = 0; gi < total; ++gi)
        if (!std::isfinite(Xn[k * total + gi])) throw SimulationError(i, gi, "non-finite state");
    group_means(cost.data(), 1, fbar.data());
    for (std::size_t g = 0; g < G; ++g) {
      double zn = Z[i * G + g] - sign * fbar[g] * dt;
      if (opts.common)
        for (std::size_t k = 0; k < p; ++k) zn += beta[g * p + k] * noise.dw0_at(i, k, g % Gn);
      Z[(i + 1) * G + g] = zn;
    }
  }

  /// Psi(t_i, mu_i) per group (max over the constraint list).
  void constraint_values(std::size_t i, double* out, std::size_t* which) {
    const double* Xi = Xat(i);
    const constraints::TimePoint tp{grid.time(i), spec.horizon};
    for (std::size_t g = 0; g < G; ++g) {
      double best = spec.constraints.empty() ? 0.0 : -std::numeric_limits<double>::infinity();
      std::size_t arg_best = 0;
      for (std::size_t c = 0; c < spec.constraints.size(); ++c) {
        const auto& con = spec.constraints[c];
        const std::span<const double> x(Xi + con.read_coordinate() * total + g * N, N);
        const double v = constraints::evaluate(con, tp, x);
        if (v > best) {
          best = v;
          arg_best = c;
        }
      }
      out[g] = best;
      if (which) which[g] = arg_best;
    }
  }

  /// Baseline running cost per group (internal sign), from a shadow ensemble.
  std::vector<double> baseline() {
    std::vector<double> C(G, 0.0);
    std::vector<double> xs(Xat(0), Xat(0) + d * total), xn(d * total), cs(total), ph(nf * total),
        mh(G * nf), cbar(G);
    for (std::size_t i = 0; i < steps; ++i) {
      const auto ctx = grid.context(i);
      for_blocks([&](std::size_t b) {
        thread_local std::vector<double> buf;
        buf.resize((2 * d + q + nf + dm.noise + p + 1) * kLanes);
        double* xb = buf.data();
        double* xo = xb + d * kLanes;
        double* ab = xo + d * kLanes;
        double* pb = ab + q * kLanes;
        const std::size_t n = lanes(b);
        gather(xs.data(), d, b, xb);
        for (std::size_t k = 0; k < q; ++k)
          std::fill_n(ab + k * kLanes, n, spec.baseline_control[i * q + k]);
        if (nf > 0) {
          spec.dynamics->features(ctx, n, kLanes, xb, ab, pb);
          scatter(pb, nf, b, ph.data());
        }
      });
      group_means(ph.data(), nf, mh.data());
      for_blocks([&](std::size_t b) {
        thread_local std::vector<double> buf;
        buf.resize((2 * d + q + nf + dm.noise + p + 1) * kLanes);
        double* xb = buf.data();
        double* xo = xb + d * kLanes;
        double* ab = xo + d * kLanes;
        double* mb = ab + q * kLanes;
        double* dw = mb + nf * kLanes;
        double* dw0 = dw + dm.noise * kLanes;
        double* cb = dw0 + p * kLanes;
        const std::size_t n = lanes(b);
        gather(xs.data(), d, b, xb);
        for (std::size_t k = 0; k < q; ++k)
          std::fill_n(ab + k * kLanes, n, spec.baseline_control[i * q + k]);
        broadcast(mh.data(), nf, b, mb);
        noise_block(i, b, dw, dw0);
        spec.dynamics->transition(ctx, n, kLanes, xb, ab, mb, dw, dw0, xo, cb);
        scatter(xo, d, b, xn.data());
        std::copy_n(cb, n, cs.data() + b * kLanes);
      });
      group_means(cs.data(), 1, cbar.data());
      for (std::size_t g = 0; g < G; ++g) C[g] += sign * cbar[g] * dt;
      xs.swap(xn);
    }
    return C;
  }
};

LossResult AuxiliaryEngine::evaluate(const PolicySet& policies, std::span<const double> z,
                                     const dynamics::NoisePlan& noise, EngineTrace* trace) const {
  return run(policies, z, noise, trace, {});
}

LossResult AuxiliaryEngine::gradient(const PolicySet& policies, std::span<const double> z,
                                     const dynamics::NoisePlan& noise,
                                     std::span<double> grad) const {
  if (grad.size() != policies.parameter_count())
    throw DimensionError("gradient buffer has " + std::to_string(grad.size()) + " entries, policy has " +
                         std::to_string(policies.parameter_count()));
  return run(policies, z, noise, nullptr, grad);
}

double AuxiliaryEngine::baseline_cost(const dynamics::NoisePlan& noise) const {
  if (spec_->baseline_control.empty()) throw ConfigError("problem has no baseline command");
  std::vector<double> z(noise.groups, 0.0);
  // Only the shadow ensemble runs; the policy is a placeholder of the right shape.
  const PolicySet empty = PolicySet::build(*spec_, Architecture{{1}, nn::Activation::identity},
                                     opts_.common, 0);
  Run r(*spec_, opts_, empty, noise, z, false);
  const auto C = r.baseline();
  double s = 0.0;
  for (double c : C) s += c;
  return s / static_cast<double>(C.size());
}

LossResult AuxiliaryEngine::run(const PolicySet& policies, std::span<const double> z,
                                const dynamics::NoisePlan& noise, EngineTrace* trace,
                                std::span<double> grad) const {
  const bool want_grad = !grad.empty();
  Run r(*spec_, opts_, policies, noise, z, want_grad);
  const std::size_t steps = r.steps, G = r.G, N = r.N, total = r.total, d = r.d, q = r.q;

  if (trace) {
    trace->z_path.assign(G * (steps + 1), 0.0);
    trace->psi.assign(G * (steps + 1), 0.0);
    trace->keep_particles = std::min(trace->keep_particles, total);
    trace->states.clear();
    trace->controls.clear();
    std::vector<double> psi0(G);
    r.constraint_values(0, psi0.data(), nullptr);
    for (std::size_t g = 0; g < G; ++g) trace->psi[g * (steps + 1)] = psi0[g];
  }
  auto keep_states = [&](std::size_t i) {
    if (!trace || trace->keep_particles == 0) return;
    const double* Xi = r.Xat(i);
    for (std::size_t j = 0; j < trace->keep_particles; ++j)
      for (std::size_t k = 0; k < d; ++k) trace->states.push_back(Xi[k * total + j]);
  };
  keep_states(0);

  // The shadow ensemble starts from X_0, which the two-buffer forward pass overwrites.
  std::vector<double> adjust(G, 0.0);
  if (opts_.use_baseline) {
    const auto C = r.baseline();
    for (std::size_t g = 0; g < G; ++g) adjust[g] = C[g] - opts_.baseline_mean;
  }

  std::vector<double> running(G, 0.0);
  for (std::size_t i = 0; i < steps; ++i) {
    r.controls(i, false);
    if (trace)
      for (std::size_t j = 0; j < trace->keep_particles; ++j)
        for (std::size_t k = 0; k < q; ++k) trace->controls.push_back(r.a[k * total + j]);
    r.martingale(i, false);
    r.transition(i);
    for (std::size_t g = 0; g < G; ++g) running[g] += r.sign * r.fbar[g] * r.dt;
    std::vector<double> col(G);
    std::vector<std::size_t> which(G);
    r.constraint_values(i + 1, col.data(), which.data());
    for (std::size_t g = 0; g < G; ++g) {
      r.values[g * steps + i] = col[g];
      r.arg[g * steps + i] = which[g];
    }
    keep_states(i + 1);
  }

  // Terminal cost, terminal constraint and baseline adjustment.
  const double* XT = r.Xat(steps);
  std::vector<double> psi_lane(r.nt * total), mpsi(G * r.nt), dG(G * r.nt), ghat(G), phi(G, 0.0);
  r.for_blocks([&](std::size_t b) {
    thread_local std::vector<double> buf;
    buf.resize((d + r.nt) * kLanes);
    r.gather(XT, d, b, buf.data());
    spec_->dynamics->terminal_features(r.lanes(b), kLanes, buf.data(), buf.data() + d * kLanes);
    r.scatter(buf.data() + d * kLanes, r.nt, b, psi_lane.data());
  });
  r.group_means(psi_lane.data(), r.nt, mpsi.data());
  for (std::size_t g = 0; g < G; ++g)
    ghat[g] = r.sign * spec_->dynamics->terminal_cost(mpsi.data() + g * r.nt, dG.data() + g * r.nt);
  if (spec_->terminal_constraint)
    for (std::size_t g = 0; g < G; ++g) {
      const std::span<const double> x(XT + spec_->terminal_constraint->read_coordinate() * total + g * N, N);
      phi[g] = constraints::evaluate(*spec_->terminal_constraint, {spec_->horizon, spec_->horizon}, x);
    }
  LossResult res;
  res.groups.resize(G);
  std::vector<constraints::PenaltyGradient> pg(G);
  for (std::size_t g = 0; g < G; ++g) {
    auto& gr = res.groups[g];
    gr.terminal = ghat[g];
    gr.z_final = r.Z[steps * G + g] + adjust[g];
    gr.running = running[g];
    gr.phi = phi[g];
    const std::span<const double> vals(r.values.data() + g * steps, steps);
    gr.max_psi = steps ? *std::max_element(vals.begin(), vals.end()) : 0.0;
    std::optional<double> phi_opt;
    if (spec_->terminal_constraint) phi_opt = phi[g];
    pg[g] = constraints::aggregate_penalty_gradient(
        spec_->constraints.empty() ? std::span<const double>{} : vals, opts_.penalty, r.dt, phi_opt);
    gr.shortfall = std::max(0.0, gr.terminal - gr.z_final);
    gr.penalty = pg[g].penalty;
    gr.loss = gr.shortfall + gr.penalty;
    if (!std::isfinite(gr.loss)) throw NonFiniteError("auxiliary loss is not finite");
  }
  double s = 0.0;
  for (const auto& gr : res.groups) s += gr.loss;
  res.loss = s / static_cast<double>(G);
  if (G > 1) {
    double v = 0.0;
    for (const auto& gr : res.groups) v += (gr.loss - res.loss) * (gr.loss - res.loss);
    res.stderr_ = std::sqrt(v / static_cast<double>(G - 1) / static_cast<double>(G));
  }

  if (trace) {
    for (std::size_t g = 0; g < G; ++g) {
      for (std::size_t i = 0; i <= steps; ++i) trace->z_path[g * (steps + 1) + i] = r.Z[i * G + g];
      for (std::size_t i = 0; i < steps; ++i) trace->psi[g * (steps + 1) + i + 1] = r.values[g * steps + i];
    }
    trace->terminal_states.assign(XT, XT + d * total);
  }
  if (!want_grad) return res;

  // ---- backward ----
  std::fill(grad.begin(), grad.end(), 0.0);
  const double scale = 1.0 / static_cast<double>(G);
  const double invN = 1.0 / static_cast<double>(N);
  std::vector<double> xbar(d * total, 0.0), xprev(d * total), abar(q * total), mbar(r.nf * total),
      dz(total), zbar(G, 0.0), zprev(G), mgbar(G * r.nf);

  {
    std::vector<double> psibar(r.nt * total, 0.0);
    for (std::size_t g = 0; g < G; ++g) {
      if (res.groups[g].terminal - res.groups[g].z_final > 0.0) {
        zbar[g] = -scale;
        for (std::size_t k = 0; k < r.nt; ++k)
          std::fill_n(psibar.data() + k * total + g * N, N, scale * r.sign * dG[g * r.nt + k] * invN);
      }
    }
    r.for_blocks([&](std::size_t b) {
      thread_local std::vector<double> buf;
      buf.resize((2 * d + r.nt) * kLanes);
      double* xb = buf.data();
      double* xg = xb + d * kLanes;
      double* pb = xg + d * kLanes;
      r.gather(XT, d, b, xb);
      r.gather(psibar.data(), r.nt, b, pb);
      std::fill_n(xg, d * kLanes, 0.0);
      spec_->dynamics->terminal_features_vjp(r.lanes(b), kLanes, xb, pb, xg);
      r.scatter(xg, d, b, xbar.data());
    });
    if (spec_->terminal_constraint) {
      const auto& tc = *spec_->terminal_constraint;
      const std::size_t k = tc.read_coordinate();
      std::vector<double> gx(N);
      for (std::size_t g = 0; g < G; ++g) {
        if (pg[g].d_phi == 0.0) continue;
        const std::span<const double> x(XT + k * total + g * N, N);
        constraints::evaluate_with_gradient(tc, {spec_->horizon, spec_->horizon}, x, gx);
        for (std::size_t j = 0; j < N; ++j) xbar[k * total + g * N + j] += scale * pg[g].d_phi * gx[j];
      }
    }
  }

  std::vector<double> gx(N);
  for (std::size_t i = steps; i-- > 0;) {
    // Constraint at t_{i+1}.
    if (!spec_->constraints.empty()) {
      const double* Xn = r.Xat(i + 1);
      const constraints::TimePoint tp{r.grid.time(i + 1), spec_->horizon};
      for (std::size_t g = 0; g < G; ++g) {
        const double dv = pg[g].d_values[i];
        if (dv == 0.0) continue;
        const auto& con = spec_->constraints[r.arg[g * steps + i]];
        const std::size_t k = con.read_coordinate();
        const std::span<const double> x(Xn + k * total + g * N, N);
        constraints::evaluate_with_gradient(con, tp, x, gx);
        for (std::size_t j = 0; j < N; ++j) xbar[k * total + g * N + j] += scale * dv * gx[j];
      }
    }

    r.controls(i, true);
    r.martingale(i, true);
    const double* Xi = r.Xat(i);
    const auto ctx = r.grid.context(i);

    // Transition pull-back.
    r.for_blocks([&](std::size_t b) {
      thread_local std::vector<double> buf;
      const std::size_t nf = r.nf;
      buf.resize((3 * d + 2 * q + 2 * nf + r.dm.noise + r.p + 1) * kLanes);
      double* xb = buf.data();
      double* xnb = xb + d * kLanes;
      double* xpb = xnb + d * kLanes;
      double* ab = xpb + d * kLanes;
      double* abb = ab + q * kLanes;
      double* mb = abb + q * kLanes;
      double* mbb = mb + nf * kLanes;
      double* dw = mbb + nf * kLanes;
      double* dw0 = dw + r.dm.noise * kLanes;
      double* cb = dw0 + r.p * kLanes;
      const std::size_t n = r.lanes(b), base = b * kLanes;
      r.gather(Xi, d, b, xb);
      r.gather(xbar.data(), d, b, xnb);
      r.gather(r.a.data(), q, b, ab);
      r.broadcast(r.m.data(), nf, b, mb);
      r.noise_block(i, b, dw, dw0);
      for (std::size_t lane = 0; lane < n; ++lane)
        cb[lane] = -r.sign * r.dt * invN * zbar[(base + lane) / N];
      spec_->dynamics->transition_vjp(ctx, n, kLanes, xb, ab, mb, dw, dw0, xnb, cb, xpb, abb, mbb);
      r.scatter(xpb, d, b, xprev.data());
      r.scatter(abb, q, b, abar.data());
      r.scatter(mbb, nf, b, mbar.data());
    });

    // Mean-field features: every particle of the group receives mbar_g / N.
    if (r.nf > 0) {
      for (std::size_t g = 0; g < G; ++g)
        for (std::size_t k = 0; k < r.nf; ++k) {
          const double* row = mbar.data() + k * total + g * N;
          double s2 = 0.0;
          for (std::size_t j = 0; j < N; ++j) s2 += row[j];
          mgbar[g * r.nf + k] = s2 * invN;
        }
    }

    // Features and network pull-back, parameter gradients per chunk.
    const auto& net = policies.alpha[i];
    const nn::BatchEvaluator eval(net);
    const std::size_t np = net.parameter_count(), ts = eval.tape_size();
    std::vector<double> partial(r.chunks * np, 0.0);
    r.for_chunks([&](std::size_t c) {
      thread_local std::vector<double> buf;
      buf.resize((2 * d + 2 * q + r.nf + r.n_in) * kLanes);
      double* xb = buf.data();
      double* xpb = xb + d * kLanes;
      double* ab = xpb + d * kLanes;
      double* abb = ab + q * kLanes;
      double* pb = abb + q * kLanes;
      double* dx = pb + r.nf * kLanes;
      double* gpart = partial.data() + c * np;
      const std::size_t b1 = std::min(r.blocks, (c + 1) * kChunkBlocks);
      for (std::size_t b = c * kChunkBlocks; b < b1; ++b) {
        const std::size_t n = r.lanes(b), base = b * kLanes;
        r.gather(xprev.data(), d, b, xpb);
        r.gather(abar.data(), q, b, abb);
        if (r.nf > 0) {
          r.gather(Xi, d, b, xb);
          r.gather(r.a.data(), q, b, ab);
          r.broadcast(mgbar.data(), r.nf, b, pb);
          spec_->dynamics->features_vjp(ctx, n, kLanes, xb, ab, pb, xpb, abb);
        }
        eval.backward(r.tapes.data() + b * ts, n, abb, dx, gpart);
        for (std::size_t k = 0; k < d; ++k)
          for (std::size_t lane = 0; lane < n; ++lane) xpb[k * kLanes + lane] += dx[k * kLanes + lane];
        std::copy_n(dx + d * kLanes, n, dz.data() + base);
        r.scatter(xpb, d, b, xprev.data());
      }
    });
    double* ga = grad.data() + policies.alpha_offset(i);
    for (std::size_t c = 0; c < r.chunks; ++c)
      for (std::size_t k = 0; k < np; ++k) ga[k] += partial[c * np + k];

    for (std::size_t g = 0; g < G; ++g) {
      double s2 = 0.0;
      for (std::size_t j = 0; j < N; ++j) s2 += dz[g * N + j];
      zprev[g] = zbar[g] + s2;
    }

    if (opts_.common) {
      const nn::BatchEvaluator beval(policies.beta[i]);
      const std::size_t gblocks = (G + kLanes - 1) / kLanes, bts = beval.tape_size();
      double* gb = grad.data() + policies.beta_offset(i);
      std::vector<double> dout(r.p * kLanes), din((1 + r.p) * kLanes);
      for (std::size_t b = 0; b < gblocks; ++b) {
        const std::size_t n = std::min(kLanes, G - b * kLanes);
        for (std::size_t lane = 0; lane < n; ++lane) {
          const std::size_t g = b * kLanes + lane;
          for (std::size_t k = 0; k < r.p; ++k)
            dout[k * kLanes + lane] = zbar[g] * noise.dw0_at(i, k, g % r.Gn);
        }
        beval.backward(r.beta_tapes.data() + b * bts, n, dout.data(), din.data(), gb);
        for (std::size_t lane = 0; lane < n; ++lane) zprev[b * kLanes + lane] += din[lane];
      }
    }
    xbar.swap(xprev);
    zbar.swap(zprev);
  }
  for (double v : grad)
    if (!std::isfinite(v)) throw NonFiniteError("auxiliary loss gradient is not finite");
  return res;
}

}  // namespace mfls::levelset
