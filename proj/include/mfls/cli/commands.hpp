#pragma once

#include <iosfwd>
#include <string>

#include "json.hpp"
#include "mfls/cli/config.hpp"
#include "mfls/levelset/recover.hpp"
#include "mfls/levelset/train.hpp"

namespace mfls::cli {

enum ExitCode : int { ok = 0, other_error = 1, config_error = 2, infeasible_grid = 3, diverged = 4 };

/// Maps an exception thrown by a command to its exit code.
int exit_code_for(const std::exception& e);

const char* version();

/// Fields present in every output file.
nlohmann::json provenance(const RunConfig& cfg, const std::string& command);
/// "# mfls <version> config_hash=<hex> seed=<n>" header line for CSV outputs.
std::string csv_header(const RunConfig& cfg, const std::string& command);

struct SolveReport {
  levelset::TrainResult training;
  std::optional<double> value;
  std::optional<levelset::AffineFit> affine;
  std::optional<levelset::AuditResult> audit;
  nlohmann::json summary;
};

/// Trains, evaluates the curve, extracts V0 and audits the recovered control.
/// Writes summary.json, curve.csv, training_log.csv, checkpoint.json,
/// trajectories.csv and terminal_samples.csv to cfg.out. Throws
/// UndefinedValueError after writing when the grid does not bracket V0.
SolveReport run_solve(const RunConfig& cfg, std::ostream& log);

/// Re-evaluates the curve of a saved checkpoint (cfg.checkpoint).
levelset::LevelSetCurve run_curve(const RunConfig& cfg, std::ostream& log);

/// Audits the control recovered from a checkpoint at evaluate.z0 (or the stored V0).
levelset::AuditResult run_evaluate(const RunConfig& cfg, std::ostream& log);

/// Reference value of the benchmark; writes oracle.json (and dp_slices.csv for storage).
benchmarks::OracleResult run_oracle(const RunConfig& cfg, std::ostream& log);

void list_benchmarks(std::ostream& os);

}  // namespace mfls::cli
