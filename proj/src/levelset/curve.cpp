#include "mfls/levelset/curve.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "mfls/util/error.hpp"

namespace mfls::levelset {

void LevelSetCurve::validate() const {
  if (z.empty()) throw ConfigError("level-set curve is empty");
  if (w.size() != z.size() || (!stderr_.empty() && stderr_.size() != z.size()))
    throw DimensionError("level-set curve columns differ in length");
  for (std::size_t m = 1; m < z.size(); ++m)
    if (!(z[m] > z[m - 1])) throw ConfigError("level-set grid must be strictly increasing");
}

void LevelSetCurve::write_csv(std::ostream& os) const {
  os.precision(17);
  os << "z,w,stderr\n";
  for (std::size_t m = 0; m < z.size(); ++m)
    os << z[m] << ',' << w[m] << ',' << (stderr_.empty() ? 0.0 : stderr_[m]) << '\n';
}

std::vector<double> regular_grid(double lo, double hi, std::size_t points) {
  if (!std::isfinite(lo) || !std::isfinite(hi)) throw ConfigError("grid bounds must be finite");
  if (points == 0) throw ConfigError("grid needs at least one point");
  if (points == 1) return {lo};
  if (!(hi > lo)) throw ConfigError("grid upper bound must exceed the lower bound");
  std::vector<double> g(points);
  for (std::size_t m = 0; m < points; ++m)
    g[m] = lo + (hi - lo) * static_cast<double>(m) / static_cast<double>(points - 1);
  return g;
}

std::optional<double> extract_value(const LevelSetCurve& curve, double eps) {
  curve.validate();
  const std::size_t n = curve.size();
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t m = curve.sense == dynamics::Sense::minimize ? k : n - 1 - k;
    if (curve.w[m] <= eps) return curve.z[m];
  }
  return std::nullopt;
}

AffineFit extract_value_affine(const LevelSetCurve& curve, double knee_fraction) {
  curve.validate();
  const std::size_t n = curve.size();
  const bool minimize = curve.sense == dynamics::Sense::minimize;
  // Index in the direction of decreasing w.
  auto at = [&](std::size_t k) { return minimize ? k : n - 1 - k; };
  const double wmax = *std::max_element(curve.w.begin(), curve.w.end());
  const double cut = knee_fraction * wmax;
  std::size_t end = 0;
  while (end + 1 < n && curve.w[at(end + 1)] < curve.w[at(end)] && curve.w[at(end + 1)] >= cut) ++end;
  if (!(wmax > 0.0) || end < 2) throw UndefinedValueError("no decreasing segment with three points");

  const double cnt = static_cast<double>(end + 1);
  double sz = 0, sw = 0, szz = 0, szw = 0;
  for (std::size_t k = 0; k <= end; ++k) {
    const double z = curve.z[at(k)], w = curve.w[at(k)];
    sz += z;
    sw += w;
    szz += z * z;
    szw += z * w;
  }
  const double den = cnt * szz - sz * sz;
  AffineFit fit;
  fit.slope = (cnt * szw - sz * sw) / den;
  fit.intercept = (sw - fit.slope * sz) / cnt;
  if (fit.slope == 0.0) throw UndefinedValueError("affine segment is flat");
  fit.root = -fit.intercept / fit.slope;
  double rss = 0.0;
  for (std::size_t k = 0; k <= end; ++k) {
    const double e = curve.w[at(k)] - (fit.intercept + fit.slope * curve.z[at(k)]);
    rss += e * e;
  }
  fit.residual = std::sqrt(rss / cnt);
  fit.first = std::min(at(0), at(end));
  fit.last = std::max(at(0), at(end));
  return fit;
}

}  // namespace mfls::levelset
