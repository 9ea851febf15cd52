#include "mfls/constraints/constraint.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mfls/measures/empirical.hpp"
#include "mfls/util/error.hpp"

namespace mfls::constraints {

namespace {

constexpr struct {
  ConstraintKind kind;
  const char* name;
} kKindNames[] = {
    {ConstraintKind::probability_of_set, "probability_of_set"},
    {ConstraintKind::as_distance, "as_distance"},
    {ConstraintKind::wasserstein_ball, "wasserstein_ball"},
    {ConstraintKind::terminal_only, "terminal_only"},
    {ConstraintKind::discrete_times, "discrete_times"},
    {ConstraintKind::tail_conditional, "tail_conditional"},
    {ConstraintKind::terminal_variance_cap, "terminal_variance_cap"},
    {ConstraintKind::squared_excursion, "squared_excursion"},
    {ConstraintKind::custom, "custom"},
};

bool same_time(double a, double b, double horizon) {
  return std::fabs(a - b) <= 1e-9 * std::max(1.0, std::fabs(horizon));
}

bool active(const ConstraintSpec& spec, const TimePoint& tp) {
  switch (spec.kind) {
    case ConstraintKind::terminal_only:
      return tp.is_terminal();
    case ConstraintKind::discrete_times:
      return std::any_of(spec.times.begin(), spec.times.end(),
                         [&](double s) { return same_time(s, tp.t, tp.horizon); });
    default:
      return true;
  }
}

double raw_value(const ConstraintSpec& spec, const TimePoint& tp, std::span<const double> x,
                 std::span<double> grad) {
  const std::size_t n = x.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  const bool want = !grad.empty();
  if (want) std::fill(grad.begin(), grad.end(), 0.0);
  switch (spec.kind) {
    case ConstraintKind::probability_of_set: {
      std::size_t inside = 0;
      for (double v : x)
        if (v >= spec.lo && v <= spec.hi) ++inside;
      return spec.level - static_cast<double>(inside) * inv_n;
    }
    case ConstraintKind::as_distance: {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (x[j] < spec.lo) {
          s += spec.lo - x[j];
          if (want) grad[j] = -inv_n;
        } else if (x[j] > spec.hi) {
          s += x[j] - spec.hi;
          if (want) grad[j] = inv_n;
        }
      }
      return s * inv_n;
    }
    case ConstraintKind::wasserstein_ball: {
      if (spec.benchmark.size() != n)
        throw DimensionError("wasserstein_ball benchmark has " +
                             std::to_string(spec.benchmark.size()) + " samples, measure has " +
                             std::to_string(n));
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
      std::vector<double> eta(spec.benchmark);
      std::sort(eta.begin(), eta.end());
      double s = 0.0;
      for (std::size_t r = 0; r < n; ++r) s += (x[order[r]] - eta[r]) * (x[order[r]] - eta[r]);
      const double w = std::sqrt(s * inv_n);
      if (want && w > 0.0)
        for (std::size_t r = 0; r < n; ++r) grad[order[r]] = (x[order[r]] - eta[r]) * inv_n / w;
      return w - spec.radius;
    }
    case ConstraintKind::terminal_only:
    case ConstraintKind::discrete_times:
      if (!active(spec, tp)) return 0.0;
      return want ? evaluate_with_gradient(*spec.inner, tp, x, grad) : evaluate(*spec.inner, tp, x);
    case ConstraintKind::tail_conditional: {
      if (want)
        for (std::size_t j = 0; j < n; ++j)
          if (x[j] <= spec.theta) grad[j] = -inv_n;
      return measures::tail_conditional(x, spec.theta, spec.delta);
    }
    case ConstraintKind::terminal_variance_cap: {
      const double m = measures::mean(x);
      if (want)
        for (std::size_t j = 0; j < n; ++j) grad[j] = 2.0 * (x[j] - m) * inv_n;
      return measures::variance(x) - spec.cap;
    }
    case ConstraintKind::squared_excursion: {
      if (want)
        for (std::size_t j = 0; j < n; ++j) {
          const double below = spec.lo - x[j] > 0.0 ? spec.lo - x[j] : 0.0;
          const double above = x[j] - spec.hi > 0.0 ? x[j] - spec.hi : 0.0;
          grad[j] = 2.0 * (above - below) * inv_n;
        }
      return measures::squared_excursion(x, spec.lo, spec.hi);
    }
    case ConstraintKind::custom: {
      std::vector<double> scratch;
      std::span<double> g = grad;
      if (!want) {
        scratch.assign(n, 0.0);
        g = scratch;
      }
      return spec.fn(tp.t, x, g);
    }
  }
  return 0.0;
}

double finish(const ConstraintSpec& spec, double v) {
  if (!std::isfinite(v)) throw NonFiniteError(std::string("constraint ") + to_string(spec.kind) +
                                              " evaluated to a non-finite value");
  return spec.kappa > 0.0 && v <= 0.0 ? v - spec.kappa : v;
}

}  // namespace

const char* to_string(ConstraintKind kind) {
  for (const auto& e : kKindNames)
    if (e.kind == kind) return e.name;
  return "unknown";
}

ConstraintKind constraint_kind_from_string(const std::string& name) {
  for (const auto& e : kKindNames)
    if (name == e.name) return e.kind;
  throw ConfigError("unknown constraint kind '" + name + "'");
}

bool TimePoint::is_terminal() const { return same_time(t, horizon, horizon); }

ConstraintSpec ConstraintSpec::probability_of_set(double lo, double hi, double level,
                                                  std::size_t coord) {
  ConstraintSpec s;
  s.kind = ConstraintKind::probability_of_set;
  s.lo = lo;
  s.hi = hi;
  s.level = level;
  s.coordinate = coord;
  return s;
}

ConstraintSpec ConstraintSpec::as_distance(double lo, double hi, std::size_t coord) {
  ConstraintSpec s;
  s.kind = ConstraintKind::as_distance;
  s.lo = lo;
  s.hi = hi;
  s.coordinate = coord;
  return s;
}

ConstraintSpec ConstraintSpec::wasserstein_ball(std::vector<double> benchmark, double radius,
                                                std::size_t coord) {
  ConstraintSpec s;
  s.kind = ConstraintKind::wasserstein_ball;
  s.benchmark = std::move(benchmark);
  s.radius = radius;
  s.coordinate = coord;
  return s;
}

ConstraintSpec ConstraintSpec::terminal_only(ConstraintSpec inner) {
  ConstraintSpec s;
  s.kind = ConstraintKind::terminal_only;
  s.coordinate = inner.read_coordinate();
  s.inner = std::make_shared<const ConstraintSpec>(std::move(inner));
  return s;
}

ConstraintSpec ConstraintSpec::discrete_times(ConstraintSpec inner, std::vector<double> times) {
  ConstraintSpec s;
  s.kind = ConstraintKind::discrete_times;
  s.coordinate = inner.read_coordinate();
  s.inner = std::make_shared<const ConstraintSpec>(std::move(inner));
  s.times = std::move(times);
  return s;
}

ConstraintSpec ConstraintSpec::tail(double theta, double delta, std::size_t coord) {
  ConstraintSpec s;
  s.kind = ConstraintKind::tail_conditional;
  s.theta = theta;
  s.delta = delta;
  s.coordinate = coord;
  return s;
}

ConstraintSpec ConstraintSpec::variance_cap(double cap, std::size_t coord) {
  ConstraintSpec s;
  s.kind = ConstraintKind::terminal_variance_cap;
  s.cap = cap;
  s.coordinate = coord;
  return s;
}

ConstraintSpec ConstraintSpec::excursion(double lo, double hi, std::size_t coord) {
  ConstraintSpec s;
  s.kind = ConstraintKind::squared_excursion;
  s.lo = lo;
  s.hi = hi;
  s.coordinate = coord;
  return s;
}

ConstraintSpec ConstraintSpec::custom(CustomConstraint fn, std::size_t coord) {
  ConstraintSpec s;
  s.kind = ConstraintKind::custom;
  s.fn = std::move(fn);
  s.coordinate = coord;
  return s;
}

void ConstraintSpec::validate() const {
  const std::string name = to_string(kind);
  switch (kind) {
    case ConstraintKind::probability_of_set:
      if (!(lo <= hi)) throw ConfigError(name + ": empty set");
      if (!(level >= 0.0 && level <= 1.0)) throw ConfigError(name + ": level must lie in [0, 1]");
      break;
    case ConstraintKind::as_distance:
    case ConstraintKind::squared_excursion:
      if (!(lo <= hi)) throw ConfigError(name + ": lower bound exceeds upper bound");
      break;
    case ConstraintKind::wasserstein_ball:
      if (benchmark.empty()) throw ConfigError(name + ": benchmark sample is empty");
      if (!(radius >= 0.0)) throw ConfigError(name + ": radius must be nonnegative");
      break;
    case ConstraintKind::terminal_only:
    case ConstraintKind::discrete_times:
      if (!inner) throw ConfigError(name + ": missing inner constraint");
      if (kind == ConstraintKind::discrete_times && times.empty())
        throw ConfigError(name + ": empty time list");
      inner->validate();
      break;
    case ConstraintKind::tail_conditional:
      if (!std::isfinite(theta) || !std::isfinite(delta))
        throw ConfigError(name + ": theta and delta must be finite");
      break;
    case ConstraintKind::terminal_variance_cap:
      if (!(cap >= 0.0)) throw ConfigError(name + ": cap must be nonnegative");
      break;
    case ConstraintKind::custom:
      if (!fn) throw ConfigError(name + ": no function supplied");
      break;
  }
  if (kappa < 0.0) throw ConfigError(name + ": negative kappa");
}

std::size_t ConstraintSpec::read_coordinate() const { return inner ? inner->read_coordinate() : coordinate; }

bool ConstraintSpec::is_pointwise_in_time() const {
  return kind == ConstraintKind::terminal_only || kind == ConstraintKind::discrete_times;
}

double evaluate(const ConstraintSpec& spec, const TimePoint& tp, std::span<const double> x) {
  if (x.empty()) throw DimensionError("constraint evaluated on an empty measure");
  return finish(spec, raw_value(spec, tp, x, {}));
}

double evaluate_with_gradient(const ConstraintSpec& spec, const TimePoint& tp,
                              std::span<const double> x, std::span<double> grad) {
  if (x.empty()) throw DimensionError("constraint evaluated on an empty measure");
  if (grad.size() != x.size()) throw DimensionError("gradient buffer size differs from sample count");
  return finish(spec, raw_value(spec, tp, x, grad));
}

ConstraintSpec kappa_modify(const ConstraintSpec& spec, double kappa) {
  if (!(kappa > 0.0)) throw ConfigError("kappa must be positive");
  ConstraintSpec out = spec;
  out.kappa = kappa;
  return out;
}

const char* to_string(PenaltyKind kind) {
  switch (kind) {
    case PenaltyKind::integral: return "integral";
    case PenaltyKind::supremum: return "supremum";
    case PenaltyKind::terminal: return "terminal";
  }
  return "unknown";
}

PenaltyKind penalty_kind_from_string(const std::string& name) {
  if (name == "integral") return PenaltyKind::integral;
  if (name == "supremum") return PenaltyKind::supremum;
  if (name == "terminal") return PenaltyKind::terminal;
  throw ConfigError("unknown penalty mode '" + name + "'");
}

void validate_penalty(const std::vector<ConstraintSpec>& specs, const PenaltyMode& mode) {
  if (!(mode.weight > 0.0) || !std::isfinite(mode.weight))
    throw ConfigError("penalty weight must be positive and finite");
  for (const auto& s : specs) {
    s.validate();
    if (mode.kind == PenaltyKind::integral && s.is_pointwise_in_time())
      throw ConfigError(std::string("constraint ") + to_string(s.kind) +
                        " is only defined at isolated times and cannot use integral penalty");
  }
}

PenaltyGradient aggregate_penalty_gradient(std::span<const double> values, const PenaltyMode& mode,
                                           double dt, std::optional<double> phi) {
  PenaltyGradient out;
  out.d_values.assign(values.size(), 0.0);
  const double w = mode.weight;
  switch (mode.kind) {
    case PenaltyKind::integral:
      for (std::size_t i = 0; i < values.size(); ++i)
        if (values[i] > 0.0) {
          out.penalty += w * values[i] * dt;
          out.d_values[i] = w * dt;
        }
      break;
    case PenaltyKind::supremum: {
      std::size_t arg = values.size();
      double best = 0.0;
      for (std::size_t i = 0; i < values.size(); ++i)
        if (values[i] > best) {
          best = values[i];
          arg = i;
        }
      if (arg < values.size()) {
        out.penalty = w * best;
        out.d_values[arg] = w;
      }
      break;
    }
    case PenaltyKind::terminal:
      break;
  }
  if (phi && *phi > 0.0) {
    out.penalty += w * *phi;
    out.d_phi = w;
  }
  return out;
}

double aggregate_penalty(std::span<const double> values, const PenaltyMode& mode, double dt,
                         std::optional<double> phi) {
  return aggregate_penalty_gradient(values, mode, dt, phi).penalty;
}

}  // namespace mfls::constraints
