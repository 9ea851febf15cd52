#pragma once

// Run configuration read from an INI file:
//
//   [run]        benchmark, scale, seed, out, threads, checkpoint
//   [problem]    parameter overrides of the benchmark (keys depend on the id)
//   [train]      solver settings (particles, groups, iterations, grid, ...)
//   [penalty]    kind = integral | supremum | terminal, weight
//   [evaluate]   re-simulation of a recovered control
//   [curve]      batch used by the curve command
//   [oracle]     DP grid and refinement levels
//   [constraint.NAME]  extra law constraints appended to the problem
//
// Every key is checked; unknown sections or keys are errors. README.md lists
// the keys of each section.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mfls/benchmarks/registry.hpp"
#include "mfls/constraints/constraint.hpp"
#include "mfls/levelset/train.hpp"

namespace mfls::cli {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
  std::optional<std::string> scale;
  std::optional<std::string> checkpoint;
};

struct EvaluateSettings {
  std::size_t particles = 50000;
  std::size_t groups = 1;
  std::size_t keep_particles = 20;
  std::optional<double> z0;  // defaults to V0 stored with the checkpoint
};

struct CurveSettings {
  std::size_t particles = 0;  // 0: evaluation batch of [train]
  std::size_t groups = 0;
  std::size_t replicates = 0;
};

struct RunConfig {
  std::string benchmark;
  benchmarks::Scale scale = benchmarks::Scale::desk;
  std::uint64_t seed = 0;
  std::string out = ".";
  int threads = 0;  // 0: OpenMP default
  std::string checkpoint;
  benchmarks::BenchmarkParams problem;
  levelset::TrainConfig train;
  std::vector<constraints::ConstraintSpec> extra_constraints;
  EvaluateSettings evaluate;
  CurveSettings curve;
  benchmarks::DpGrid dp;
  std::size_t dp_levels = 3;

  /// FNV-1a of the sorted explicit settings (file plus command-line overrides).
  std::uint64_t hash = 0;
  std::map<std::string, std::string> explicit_settings;

  dynamics::ProblemSpec build_problem() const;
  nlohmann::json to_json() const;
};

RunConfig parse_config(const std::string& ini_text, const Overrides& overrides = {});
RunConfig load_config(const std::string& path, const Overrides& overrides = {});
/// Configuration of a benchmark with defaults only.
RunConfig default_config(const std::string& benchmark, benchmarks::Scale scale);

std::string hash_hex(std::uint64_t h);

}  // namespace mfls::cli
