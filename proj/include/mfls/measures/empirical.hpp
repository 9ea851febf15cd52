#pragma once

// Statistics of uniformly weighted empirical measures. Variance uses the
// population convention (divide by N), matching the particle objective that is
// differentiated during training.

#include <cstddef>
#include <span>
#include <vector>

namespace mfls::measures {

/// N support points in R^k stored row-major; every point has weight 1/N.
class EmpiricalMeasure {
 public:
  EmpiricalMeasure(std::vector<double> points, std::size_t dim);
  static EmpiricalMeasure from_samples(std::span<const double> samples);

  std::size_t size() const noexcept { return points_.size() / dim_; }
  std::size_t dim() const noexcept { return dim_; }
  std::span<const double> point(std::size_t j) const { return {points_.data() + j * dim_, dim_}; }
  std::vector<double> coordinate(std::size_t k) const;
  /// Marginal on one coordinate.
  EmpiricalMeasure marginal(std::size_t k) const { return from_samples(coordinate(k)); }
  std::span<const double> data() const noexcept { return points_; }

 private:
  std::vector<double> points_;
  std::size_t dim_;
};

double mean(std::span<const double> x);
double variance(std::span<const double> x);
std::vector<double> mean(const EmpiricalMeasure& mu);
std::vector<double> variance(const EmpiricalMeasure& mu);

/// (delta - E[X | X <= theta]) * P(X <= theta), written as
/// (1/N) sum_{x_j <= theta} (delta - x_j) so that an empty tail gives 0.
double tail_conditional(std::span<const double> x, double theta, double delta);
double tail_conditional(const EmpiricalMeasure& mu, double theta, double delta);

/// Exact W2 between two equal-size one-dimensional empirical measures
/// (sorted coupling).
double wasserstein2_1d(std::span<const double> x, std::span<const double> y);
double wasserstein2_1d(const EmpiricalMeasure& mu, const EmpiricalMeasure& eta);

/// Mean of (lo - x)_+^2 + (x - hi)_+^2.
double squared_excursion(std::span<const double> x, double lo, double hi);
double squared_excursion(const EmpiricalMeasure& mu, double lo, double hi);

}  // namespace mfls::measures
