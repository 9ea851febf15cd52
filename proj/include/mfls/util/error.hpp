#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mfls {

/// Invalid configuration or parameter values, detected before any compute.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Array shapes that do not chain (network inputs, parameter blocks, measures).
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NonFiniteError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A particle state became non-finite during a time step.
class SimulationError : public std::runtime_error {
 public:
  SimulationError(std::size_t step, std::size_t particle, const std::string& what)
      : std::runtime_error("step " + std::to_string(step) + ", particle " +
                           std::to_string(particle) + ": " + what),
        step_(step),
        particle_(particle) {}

  std::size_t step() const noexcept { return step_; }
  std::size_t particle() const noexcept { return particle_; }

 private:
  std::size_t step_;
  std::size_t particle_;
};

/// Training produced a non-finite loss or gradient.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t iteration, const std::string& what)
      : std::runtime_error("iteration " + std::to_string(iteration) + ": " + what),
        iteration_(iteration) {}

  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

/// No grid point passes the level-set threshold.
class UndefinedValueError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mfls
