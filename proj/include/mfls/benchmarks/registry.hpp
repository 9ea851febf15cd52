#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mfls/benchmarks/markowitz.hpp"
#include "mfls/benchmarks/storage.hpp"
#include "mfls/benchmarks/storage_dp.hpp"
#include "mfls/dynamics/problem.hpp"
#include "mfls/levelset/train.hpp"

namespace mfls::benchmarks {

enum class Scale { desk, paper };

Scale scale_from_string(const std::string& s);
const char* to_string(Scale s);

struct BenchmarkInfo {
  std::string id;
  std::string description;
};

/// mv-dual, mv-constrained, mv-primal, storage, trivial.
const std::vector<BenchmarkInfo>& list_benchmarks();

/// Problem parameters for one benchmark id; only the block matching the id is used.
struct BenchmarkParams {
  std::string id;
  MeanVarianceParams mv;
  std::size_t mv_steps = 50;
  StorageParams storage;
  std::size_t trivial_steps = 5;
};

BenchmarkParams default_params(const std::string& id, Scale scale);
dynamics::ProblemSpec build_problem(const BenchmarkParams& params);
inline dynamics::ProblemSpec build_problem(const std::string& id, Scale scale = Scale::desk) {
  return build_problem(default_params(id, scale));
}

levelset::TrainConfig default_train_config(const std::string& id, Scale scale);

struct OracleResult {
  std::string id;
  std::string method;
  double value = 0.0;
  nlohmann::json details = nlohmann::json::object();
};

/// Analytic values for the mean-variance problems, grid DP for storage.
/// Throws ConfigError for ids without an oracle. `study` receives the DP levels for storage.
OracleResult oracle(const BenchmarkParams& params, const DpGrid& grid = {}, std::size_t dp_levels = 3,
                    DpRefinement* study = nullptr);

}  // namespace mfls::benchmarks
