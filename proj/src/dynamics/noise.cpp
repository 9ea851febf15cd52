#include "mfls/dynamics/noise.hpp"

#include <cmath>
#include <random>

namespace mfls::dynamics {

double NoisePlan::w0_at(std::size_t step, std::size_t k, std::size_t g) const {
  double w = 0.0;
  for (std::size_t i = 0; i < step; ++i) w += dw0_at(i, k, g);
  return w;
}

NoisePlan NoisePlan::generate(const ProblemSpec& spec, std::size_t groups, std::size_t particles,
                              std::uint64_t seed, const std::string& stream, std::uint64_t index) {
  if (groups == 0 || particles == 0) throw ConfigError("noise plan needs at least one particle");
  const auto dims = spec.dims();
  NoisePlan plan;
  plan.steps = spec.steps;
  plan.groups = groups;
  plan.particles = particles;
  plan.state_dim = dims.state;
  plan.noise_dim = dims.noise;
  plan.common_dim = dims.common;
  plan.dt = spec.grid().dt();
  plan.seed = seed;
  plan.stream = stream;
  plan.index = index;
  const std::size_t total = plan.total();
  plan.x0.assign(dims.state * total, 0.0);
  plan.dw.assign(plan.steps * dims.noise * total, 0.0);
  plan.dw0.assign(plan.steps * dims.common * groups, 0.0);
  const double sq = std::sqrt(plan.dt);
  const std::size_t blocks = (particles + kNoiseBlock - 1) / kNoiseBlock;
  std::vector<double> x(dims.state);

#pragma omp parallel for schedule(static) firstprivate(x)
  for (std::size_t gb = 0; gb < groups * blocks; ++gb) {
    const std::size_t g = gb / blocks, b = gb % blocks;
    Engine eng(derive_seed(seed, stream, {index, g, b}));
    std::normal_distribution<double> normal;
    const std::size_t j0 = b * kNoiseBlock, j1 = std::min(particles, j0 + kNoiseBlock);
    for (std::size_t j = j0; j < j1; ++j) {
      spec.initial(eng, x);
      for (std::size_t k = 0; k < dims.state; ++k) plan.x0[k * total + g * particles + j] = x[k];
    }
    for (std::size_t i = 0; i < plan.steps; ++i)
      for (std::size_t k = 0; k < dims.noise; ++k) {
        double* row = plan.dw.data() + (i * dims.noise + k) * total + g * particles;
        for (std::size_t j = j0; j < j1; ++j) row[j] = sq * normal(eng);
      }
  }
  if (dims.common > 0) {
    const std::string common = stream + "/common";
    for (std::size_t g = 0; g < groups; ++g) {
      Engine eng(derive_seed(seed, common, {index, g}));
      std::normal_distribution<double> normal;
      for (std::size_t i = 0; i < plan.steps; ++i)
        for (std::size_t k = 0; k < dims.common; ++k)
          plan.dw0[(i * dims.common + k) * groups + g] = sq * normal(eng);
    }
  }
  return plan;
}

}  // namespace mfls::dynamics
