#pragma once

// Backward induction for the storage problem with rho = 1, where every
// producer sees the same production noise and the problem is a standard
// control problem in (X, P, E), E the log-spot factor. The storage level moves
// between grid nodes; expectations over the two Gaussian shocks use
// Gauss-Hermite quadrature and multilinear interpolation in (P, E).

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "mfls/benchmarks/storage.hpp"

namespace mfls::benchmarks {

struct DpGrid {
  std::size_t x_nodes = 51;
  std::size_t p_nodes = 41;
  std::size_t e_nodes = 61;
  double e_width = 4.5;  // half-width of the E grid in stationary standard deviations
};

struct DpSlice {
  std::size_t step = 0;
  std::vector<double> x, p;
  std::vector<double> value;  // x-major, at E = 0
};

struct DpResult {
  double value = 0.0;
  DpGrid grid;
  double seconds = 0.0;
  std::vector<DpSlice> slices;
  /// Optimal injection on (X, P, E) nodes, per step, for policy playback.
  std::vector<double> x_axis, p_axis, e_axis;
  std::vector<std::vector<double>> control;

  /// Interpolated optimal control at step i (X snapped to the nearest node).
  double control_at(std::size_t step, double x, double p, double e) const;
};

/// Physicists' Gauss-Hermite order 7 rescaled to a standard normal: nodes xi_k, weights w_k.
struct GaussHermite7 {
  static const double nodes[7];
  static const double weights[7];
};

DpResult storage_dp_reference(const StorageParams& params, const DpGrid& grid = {},
                              bool keep_policy = false);

struct DpRefinement {
  std::vector<DpResult> levels;
  double value = 0.0;        // finest level
  double last_change = 0.0;  // relative change between the two finest levels
  bool monotone = true;      // values move in one direction across levels
  bool converged = true;     // last_change <= 1%
};

/// Solves on `base` and on grids refined by the given factors (about 1.5x per level).
DpRefinement storage_dp_refinement(const StorageParams& params, const DpGrid& base,
                                   std::size_t levels = 3);

void write_dp_slices_csv(std::ostream& os, const DpResult& result);

}  // namespace mfls::benchmarks
