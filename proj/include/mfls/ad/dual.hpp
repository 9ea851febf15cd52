#pragma once

// Forward-mode dual numbers with a fixed number of tangent directions.
// Model coefficients are written as templates over the scalar type, so the
// same code yields values (double) and local Jacobians (Dual).

#include <array>
#include <cmath>
#include <cstddef>

namespace mfls::ad {

inline constexpr std::size_t kTangents = 8;

struct Dual {
  double v = 0.0;
  std::array<double, kTangents> d{};

  Dual() = default;
  Dual(double value) : v(value) {}  // NOLINT: implicit promotion of constants

  static Dual variable(double value, std::size_t slot) {
    Dual x(value);
    x.d[slot] = 1.0;
    return x;
  }

  Dual& operator+=(const Dual& o) {
    v += o.v;
    for (std::size_t k = 0; k < kTangents; ++k) d[k] += o.d[k];
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v -= o.v;
    for (std::size_t k = 0; k < kTangents; ++k) d[k] -= o.d[k];
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    for (std::size_t k = 0; k < kTangents; ++k) d[k] = d[k] * o.v + v * o.d[k];
    v *= o.v;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    const double inv = 1.0 / o.v;
    const double q = v * inv;
    for (std::size_t k = 0; k < kTangents; ++k) d[k] = (d[k] - q * o.d[k]) * inv;
    v = q;
    return *this;
  }
};

inline Dual operator-(Dual a) {
  a.v = -a.v;
  for (auto& x : a.d) x = -x;
  return a;
}
inline Dual operator+(Dual a, const Dual& b) { return a += b; }
inline Dual operator-(Dual a, const Dual& b) { return a -= b; }
inline Dual operator*(Dual a, const Dual& b) { return a *= b; }
inline Dual operator/(Dual a, const Dual& b) { return a /= b; }
inline Dual operator+(Dual a, double b) { a.v += b; return a; }
inline Dual operator+(double b, Dual a) { a.v += b; return a; }
inline Dual operator-(Dual a, double b) { a.v -= b; return a; }
inline Dual operator-(double b, const Dual& a) { return -a + b; }
inline Dual operator*(Dual a, double b) {
  a.v *= b;
  for (auto& x : a.d) x *= b;
  return a;
}
inline Dual operator*(double b, Dual a) { return a * b; }
inline Dual operator/(Dual a, double b) { return a * (1.0 / b); }

inline bool operator<(const Dual& a, const Dual& b) { return a.v < b.v; }
inline bool operator>(const Dual& a, const Dual& b) { return a.v > b.v; }
inline bool operator<=(const Dual& a, const Dual& b) { return a.v <= b.v; }
inline bool operator>=(const Dual& a, const Dual& b) { return a.v >= b.v; }

namespace detail {
inline Dual chain(const Dual& a, double value, double slope) {
  Dual r(value);
  for (std::size_t k = 0; k < kTangents; ++k) r.d[k] = slope * a.d[k];
  return r;
}
}  // namespace detail

inline Dual exp(const Dual& a) {
  const double e = std::exp(a.v);
  return detail::chain(a, e, e);
}
inline Dual log(const Dual& a) { return detail::chain(a, std::log(a.v), 1.0 / a.v); }
inline Dual sqrt(const Dual& a) {
  const double s = std::sqrt(a.v);
  return detail::chain(a, s, s > 0.0 ? 0.5 / s : 0.0);
}
inline Dual tanh(const Dual& a) {
  const double t = std::tanh(a.v);
  return detail::chain(a, t, 1.0 - t * t);
}
inline Dual cos(const Dual& a) { return detail::chain(a, std::cos(a.v), -std::sin(a.v)); }
inline Dual sin(const Dual& a) { return detail::chain(a, std::sin(a.v), std::cos(a.v)); }

// Generic helpers usable with both double and Dual.
inline double value(double x) { return x; }
inline double value(const Dual& x) { return x.v; }

template <class T>
T pos(const T& x) {
  return value(x) > 0.0 ? x : T(0.0);
}
template <class T>
T clamp(const T& x, double lo, double hi) {
  if (value(x) < lo) return T(lo);
  if (value(x) > hi) return T(hi);
  return x;
}
template <class T>
T min(const T& a, const T& b) {
  return value(b) < value(a) ? b : a;
}

}  // namespace mfls::ad
