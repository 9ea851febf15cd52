#include "mfls/measures/empirical.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mfls/util/error.hpp"

namespace mfls::measures {

namespace {

void require_nonempty(std::size_t n) {
  if (n == 0) throw DimensionError("empirical measure has no support points");
}

void require_1d(const EmpiricalMeasure& mu) {
  if (mu.dim() != 1)
    throw DimensionError("one-dimensional measure required, got dimension " +
                         std::to_string(mu.dim()));
}

}  // namespace

EmpiricalMeasure::EmpiricalMeasure(std::vector<double> points, std::size_t dim)
    : points_(std::move(points)), dim_(dim) {
  if (dim_ == 0) throw DimensionError("measure dimension must be positive");
  if (points_.size() % dim_ != 0)
    throw DimensionError("point array length is not a multiple of the dimension");
  require_nonempty(points_.size());
}

EmpiricalMeasure EmpiricalMeasure::from_samples(std::span<const double> samples) {
  return EmpiricalMeasure(std::vector<double>(samples.begin(), samples.end()), 1);
}

std::vector<double> EmpiricalMeasure::coordinate(std::size_t k) const {
  if (k >= dim_) throw DimensionError("coordinate index out of range");
  std::vector<double> out(size());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = points_[j * dim_ + k];
  return out;
}

double mean(std::span<const double> x) {
  require_nonempty(x.size());
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double variance(std::span<const double> x) {
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size());
}

std::vector<double> mean(const EmpiricalMeasure& mu) {
  std::vector<double> out(mu.dim());
  for (std::size_t k = 0; k < mu.dim(); ++k) out[k] = mean(mu.coordinate(k));
  return out;
}

std::vector<double> variance(const EmpiricalMeasure& mu) {
  std::vector<double> out(mu.dim());
  for (std::size_t k = 0; k < mu.dim(); ++k) out[k] = variance(mu.coordinate(k));
  return out;
}

double tail_conditional(std::span<const double> x, double theta, double delta) {
  require_nonempty(x.size());
  double s = 0.0;
  for (double v : x)
    if (v <= theta) s += delta - v;
  return s / static_cast<double>(x.size());
}

double tail_conditional(const EmpiricalMeasure& mu, double theta, double delta) {
  require_1d(mu);
  return tail_conditional(mu.data(), theta, delta);
}

double wasserstein2_1d(std::span<const double> x, std::span<const double> y) {
  require_nonempty(x.size());
  if (x.size() != y.size())
    throw DimensionError("wasserstein2_1d needs equal sample counts (" +
                         std::to_string(x.size()) + " vs " + std::to_string(y.size()) + ")");
  std::vector<double> a(x.begin(), x.end()), b(y.begin(), y.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return std::sqrt(s / static_cast<double>(a.size()));
}

double wasserstein2_1d(const EmpiricalMeasure& mu, const EmpiricalMeasure& eta) {
  require_1d(mu);
  require_1d(eta);
  return wasserstein2_1d(mu.data(), eta.data());
}

double squared_excursion(std::span<const double> x, double lo, double hi) {
  if (lo > hi) throw ConfigError("squared_excursion: lower bound exceeds upper bound");
  require_nonempty(x.size());
  double s = 0.0;
  for (double v : x) {
    const double below = lo - v > 0.0 ? lo - v : 0.0;
    const double above = v - hi > 0.0 ? v - hi : 0.0;
    s += below * below + above * above;
  }
  return s / static_cast<double>(x.size());
}

double squared_excursion(const EmpiricalMeasure& mu, double lo, double hi) {
  require_1d(mu);
  return squared_excursion(mu.data(), lo, hi);
}

}  // namespace mfls::measures
