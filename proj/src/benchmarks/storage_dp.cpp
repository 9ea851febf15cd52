#include "mfls/benchmarks/storage_dp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

#include "mfls/util/error.hpp"

namespace mfls::benchmarks {

namespace {

constexpr double kGhNodes[7] = {-2.6519613568352335, -1.6735516287674714, -0.8162878828589647, 0.0,
                                0.8162878828589647,  1.6735516287674714,  2.6519613568352335};
constexpr double kGhWeights[7] = {0.0009717812450995192, 0.05451558281912703, 0.4256072526101278,
                                  0.8102646175568073,    0.4256072526101278,  0.05451558281912703,
                                  0.0009717812450995192};

std::vector<double> axis(double lo, double hi, std::size_t n) {
  if (n == 1) return {0.5 * (lo + hi)};
  std::vector<double> v(n);
  for (std::size_t k = 0; k < n; ++k) v[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1);
  return v;
}

struct Bracket {
  std::size_t lo = 0;
  double w = 0.0;  // weight of lo + 1
};

Bracket locate(const std::vector<double>& ax, double v) {
  if (ax.size() == 1) return {0, 0.0};
  const double h = ax[1] - ax[0];
  const double s = std::clamp((v - ax[0]) / h, 0.0, static_cast<double>(ax.size() - 1));
  std::size_t k = std::min(static_cast<std::size_t>(s), ax.size() - 2);
  return {k, s - static_cast<double>(k)};
}

}  // namespace

const double GaussHermite7::nodes[7] = {kGhNodes[0] * std::numbers::sqrt2, kGhNodes[1] * std::numbers::sqrt2,
                                        kGhNodes[2] * std::numbers::sqrt2, 0.0,
                                        kGhNodes[4] * std::numbers::sqrt2, kGhNodes[5] * std::numbers::sqrt2,
                                        kGhNodes[6] * std::numbers::sqrt2};
const double GaussHermite7::weights[7] = {
    kGhWeights[0] / 1.7724538509055160, kGhWeights[1] / 1.7724538509055160,
    kGhWeights[2] / 1.7724538509055160, kGhWeights[3] / 1.7724538509055160,
    kGhWeights[4] / 1.7724538509055160, kGhWeights[5] / 1.7724538509055160,
    kGhWeights[6] / 1.7724538509055160};

double DpResult::control_at(std::size_t step, double x, double p, double e) const {
  if (control.empty()) throw ConfigError("DP result was computed without the policy");
  const std::size_t np = p_axis.size(), ne = e_axis.size();
  const auto bx = locate(x_axis, x);
  const std::size_t kx = bx.w < 0.5 ? bx.lo : std::min(bx.lo + 1, x_axis.size() - 1);
  const auto bp = locate(p_axis, p), be = locate(e_axis, e);
  const auto& c = control.at(step);
  auto at = [&](std::size_t ip, std::size_t ie) { return c[(kx * np + ip) * ne + ie]; };
  const std::size_t ip1 = std::min(bp.lo + 1, np - 1), ie1 = std::min(be.lo + 1, ne - 1);
  return (1 - bp.w) * ((1 - be.w) * at(bp.lo, be.lo) + be.w * at(bp.lo, ie1)) +
         bp.w * ((1 - be.w) * at(ip1, be.lo) + be.w * at(ip1, ie1));
}

DpResult storage_dp_reference(const StorageParams& params, const DpGrid& grid, bool keep_policy) {
  params.validate();
  const auto& mk = params.market;
  if (mk.rho != 1.0) throw ConfigError("storage DP needs rho = 1 (no idiosyncratic production noise)");
  if (grid.x_nodes == 0 || grid.p_nodes < 2 || grid.e_nodes == 0)
    throw ConfigError("storage DP grid is too small");
  const auto t0 = std::chrono::steady_clock::now();

  const std::size_t steps = params.steps;
  const double dt = params.horizon / static_cast<double>(steps);
  const std::size_t nx = params.x_max > 0.0 ? grid.x_nodes : 1;
  const std::size_t np = grid.p_nodes;
  const double e_sd = mk.mean_reversion > 0.0
                          ? mk.sigma_f / std::sqrt(2.0 * mk.mean_reversion)
                          : mk.sigma_f * std::sqrt(params.horizon);
  const std::size_t ne = e_sd > 0.0 ? grid.e_nodes : 1;
  const auto xs = axis(0.0, params.x_max, nx);
  const auto ps = axis(0.0, mk.p_max, np);
  const auto es = ne == 1 ? std::vector<double>{0.0} : axis(-grid.e_width * e_sd, grid.e_width * e_sd, ne);

  const std::size_t plane = np * ne;
  std::vector<double> v_next(nx * plane, 0.0), v(nx * plane), cont(nx * plane);
  DpResult res;
  res.grid = grid;
  res.x_axis = xs;
  res.p_axis = ps;
  res.e_axis = es;
  if (keep_policy) res.control.assign(steps, std::vector<double>(nx * plane, 0.0));

  const double decay = std::exp(-mk.mean_reversion * dt);
  const double e_step = dynamics::spot_step_stddev(mk, dt);
  const double sq = std::sqrt(dt);

  std::vector<Bracket> pb(np * 7), eb(ne * 7);
  for (std::size_t i = steps; i-- > 0;) {
    const double t = dt * static_cast<double>(i);
    for (std::size_t ip = 0; ip < np; ++ip)
      for (std::size_t a = 0; a < 7; ++a) {
        const double p = ps[ip];
        const double room = std::max(0.0, std::min(p, mk.p_max - p));
        double pn = p + mk.iota * (mk.phi * mk.p_max - p) * dt +
                    mk.sigma_p * room * sq * GaussHermite7::nodes[a];
        pn = std::clamp(pn, 0.0, mk.p_max);
        pb[ip * 7 + a] = locate(ps, pn);
      }
    for (std::size_t ie = 0; ie < ne; ++ie)
      for (std::size_t b = 0; b < 7; ++b)
        eb[ie * 7 + b] = locate(es, decay * es[ie] + e_step * GaussHermite7::nodes[b]);

    // Continuation value at every (X', P, E) node.
#pragma omp parallel for collapse(2) schedule(static)
    for (std::size_t j = 0; j < nx; ++j)
      for (std::size_t ip = 0; ip < np; ++ip) {
        const double* vn = v_next.data() + j * plane;
        for (std::size_t ie = 0; ie < ne; ++ie) {
          double s = 0.0;
          for (std::size_t a = 0; a < 7; ++a) {
            const auto& bp = pb[ip * 7 + a];
            const std::size_t p1 = std::min(bp.lo + 1, np - 1);
            double inner = 0.0;
            for (std::size_t b = 0; b < 7; ++b) {
              const auto& be = eb[ie * 7 + b];
              const std::size_t e1 = std::min(be.lo + 1, ne - 1);
              const double lo = (1 - be.w) * vn[bp.lo * ne + be.lo] + be.w * vn[bp.lo * ne + e1];
              const double hi = (1 - be.w) * vn[p1 * ne + be.lo] + be.w * vn[p1 * ne + e1];
              inner += GaussHermite7::weights[b] * ((1 - bp.w) * lo + bp.w * hi);
            }
            s += GaussHermite7::weights[a] * inner;
          }
          cont[j * plane + ip * ne + ie] = s;
        }
      }

    // Best move X -> X' on the grid.
#pragma omp parallel for collapse(2) schedule(static)
    for (std::size_t k = 0; k < nx; ++k)
      for (std::size_t ip = 0; ip < np; ++ip)
        for (std::size_t ie = 0; ie < ne; ++ie) {
          const double spot = dynamics::spot_from_factor(mk, t, es[ie]);
          double best = -std::numeric_limits<double>::infinity(), best_a = 0.0;
          for (std::size_t j = 0; j < nx; ++j) {
            const double a = (xs[j] - xs[k]) / dt;
            if (a < params.a_lo - 1e-12 || a > params.a_hi + 1e-12) continue;
            const double sold = ps[ip] - a;
            const double val = (spot - params.theta * sold) * sold * dt + cont[j * plane + ip * ne + ie];
            if (val > best) {
              best = val;
              best_a = a;
            }
          }
          v[k * plane + ip * ne + ie] = best;
          if (keep_policy) res.control[i][k * plane + ip * ne + ie] = best_a;
        }

    DpSlice slice;
    slice.step = i;
    slice.x = xs;
    slice.p = ps;
    const auto e0 = locate(es, 0.0);
    slice.value.resize(nx * np);
    for (std::size_t k = 0; k < nx; ++k)
      for (std::size_t ip = 0; ip < np; ++ip) {
        const double* row = v.data() + k * plane + ip * ne;
        slice.value[k * np + ip] = (1 - e0.w) * row[e0.lo] + e0.w * row[std::min(e0.lo + 1, ne - 1)];
      }
    res.slices.push_back(std::move(slice));
    v_next.swap(v);
  }
  std::reverse(res.slices.begin(), res.slices.end());

  const auto bx = locate(xs, params.x0), bp = locate(ps, params.p0), be = locate(es, 0.0);
  double val = 0.0;
  for (int dx = 0; dx < 2; ++dx)
    for (int dp = 0; dp < 2; ++dp)
      for (int de = 0; de < 2; ++de) {
        const double w = (dx ? bx.w : 1 - bx.w) * (dp ? bp.w : 1 - bp.w) * (de ? be.w : 1 - be.w);
        if (w == 0.0) continue;
        const std::size_t kx = std::min(bx.lo + dx, nx - 1), kp = std::min(bp.lo + dp, np - 1),
                          ke = std::min(be.lo + de, ne - 1);
        val += w * v_next[kx * plane + kp * ne + ke];
      }
  res.value = val;
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

DpRefinement storage_dp_refinement(const StorageParams& params, const DpGrid& base, std::size_t levels) {
  if (levels == 0) throw ConfigError("refinement needs at least one level");
  DpRefinement out;
  DpGrid g = base;
  for (std::size_t l = 0; l < levels; ++l) {
    out.levels.push_back(storage_dp_reference(params, g));
    g.x_nodes = 2 * (g.x_nodes - 1) + 1;
    g.p_nodes = (3 * (g.p_nodes - 1)) / 2 + 1;
    g.e_nodes = (3 * (g.e_nodes - 1)) / 2 + 1;
  }
  out.value = out.levels.back().value;
  if (levels >= 2) {
    const double a = out.levels[levels - 2].value, b = out.levels[levels - 1].value;
    out.last_change = std::abs(b - a) / std::max(std::abs(b), 1e-300);
  }
  int direction = 0;
  for (std::size_t l = 1; l < levels; ++l) {
    const double d = out.levels[l].value - out.levels[l - 1].value;
    const int s = d > 0 ? 1 : (d < 0 ? -1 : 0);
    if (s != 0 && direction != 0 && s != direction) out.monotone = false;
    if (s != 0) direction = s;
  }
  out.converged = out.last_change <= 0.01;
  return out;
}

void write_dp_slices_csv(std::ostream& os, const DpResult& result) {
  os.precision(12);
  os << "step,x,p,value\n";
  for (const auto& s : result.slices)
    for (std::size_t k = 0; k < s.x.size(); ++k)
      for (std::size_t ip = 0; ip < s.p.size(); ++ip)
        os << s.step << ',' << s.x[k] << ',' << s.p[ip] << ',' << s.value[k * s.p.size() + ip] << '\n';
}

}  // namespace mfls::benchmarks
