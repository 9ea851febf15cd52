#pragma once

// Branch-free elementwise kernels used by the batched network evaluator.
// They are written so that GCC can if-convert and vectorize the enclosing
// loops (requires -fno-trapping-math); accuracy is within a few ulp of libm.

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>

namespace mfls::nn {

namespace detail {

struct Reduced {
  double two_k;  // 2^k
  double em_r;   // expm1(r)
};

// x = k ln2 + r with |r| <= ln2/2; valid for x in [-1000, 0].
inline Reduced reduce_exp(double x) {
  constexpr double kMagic = 6755399441055744.0;  // 1.5 * 2^52
  constexpr double kLog2e = 1.4426950408889634;
  constexpr double kLn2Hi = 0.6931471803691238;
  constexpr double kLn2Lo = 1.9082149292705877e-10;
  const double t = x * kLog2e + kMagic;
  const double kd = t - kMagic;
  const std::int64_t ki = static_cast<std::int64_t>(kd);
  const double r = (x - kd * kLn2Hi) - kd * kLn2Lo;
  double p = 1.0 / 479001600.0;
  p = p * r + 1.0 / 39916800.0;
  p = p * r + 1.0 / 3628800.0;
  p = p * r + 1.0 / 362880.0;
  p = p * r + 1.0 / 40320.0;
  p = p * r + 1.0 / 5040.0;
  p = p * r + 1.0 / 720.0;
  p = p * r + 1.0 / 120.0;
  p = p * r + 1.0 / 24.0;
  p = p * r + 1.0 / 6.0;
  p = p * r + 0.5;
  return {std::bit_cast<double>((ki + 1023) << 52), r + r * r * p};
}

}  // namespace detail

/// exp(x) - 1 for x <= 0.
inline double expm1_nonpositive(double x) {
  const auto red = detail::reduce_exp(x);
  return (red.two_k - 1.0) + red.two_k * red.em_r;
}

/// exp(x) for x <= 0.
inline double exp_nonpositive(double x) {
  const auto red = detail::reduce_exp(x);
  return red.two_k + red.two_k * red.em_r;
}

inline double fast_tanh(double x) {
  double a = std::fabs(x);
  a = a < 20.0 ? a : 20.0;
  const double em = expm1_nonpositive(-2.0 * a);
  return std::copysign(-em / (2.0 + em), x);
}

inline double fast_logistic(double x) {
  double a = std::fabs(x);
  a = a < 700.0 ? a : 700.0;
  const double e = exp_nonpositive(-a);
  const double lo = e / (1.0 + e);
  return x >= 0.0 ? 1.0 - lo : lo;
}

inline void tanh_inplace(double* __restrict v, std::size_t n) {
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) v[i] = fast_tanh(v[i]);
}

}  // namespace mfls::nn
