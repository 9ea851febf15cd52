#include "mfls/cli/commands.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "mfls/levelset/checkpoint.hpp"
#include "mfls/util/error.hpp"
#include "mfls/util/rng.hpp"

#ifndef MFLS_VERSION
#define MFLS_VERSION "dev"
#endif

namespace mfls::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ofstream open_out(const RunConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.out);
  const auto path = fs::path(cfg.out) / name;
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os.precision(17);
  return os;
}

void write_json(const RunConfig& cfg, const std::string& name, const json& j) {
  auto os = open_out(cfg, name);
  os << j.dump(2) << '\n';
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json affine_json(const std::optional<levelset::AffineFit>& f, const std::string& error) {
  if (!f) return {{"root", nullptr}, {"error", error}};
  return {{"root", f->root}, {"slope", f->slope}, {"intercept", f->intercept},
          {"residual", f->residual}, {"first", f->first}, {"last", f->last}};
}

json audit_json(const levelset::AuditResult& a) {
  return {{"particles", a.particles},
          {"groups", a.groups},
          {"cost", a.cost},
          {"cost_stderr", a.cost_stderr},
          {"running", a.running},
          {"terminal", a.terminal},
          {"phi", a.phi},
          {"phi_max", a.phi_max},
          {"psi_max", a.psi_max},
          {"psi_mean", a.psi_mean},
          {"psi_time_average", a.psi_time_average},
          {"terminal_mean", a.terminal_mean},
          {"terminal_variance", a.terminal_variance},
          {"step_mean", a.step_mean},
          {"step_variance", a.step_variance}};
}

void write_audit_files(const RunConfig& cfg, const std::string& command, const dynamics::ProblemSpec& spec,
                       const levelset::AuditResult& a) {
  const auto& tr = a.trace;
  const auto dm = spec.dims();
  const std::size_t steps = spec.steps, keep = tr.keep_particles, n = a.particles;
  const auto grid = spec.grid();
  {
    auto os = open_out(cfg, "trajectories.csv");
    os << csv_header(cfg, command) << '\n' << "step,time,particle,group";
    for (std::size_t k = 0; k < dm.state; ++k) os << ",x" << k;
    for (std::size_t k = 0; k < dm.control; ++k) os << ",a" << k;
    os << ",Z,psi\n";
    for (std::size_t i = 0; i <= steps; ++i)
      for (std::size_t j = 0; j < keep; ++j) {
        const std::size_t g = j / n;
        os << i << ',' << grid.time(i) << ',' << j << ',' << g;
        for (std::size_t k = 0; k < dm.state; ++k) os << ',' << tr.states[(i * keep + j) * dm.state + k];
        for (std::size_t k = 0; k < dm.control; ++k) {
          os << ',';
          if (i < steps) os << tr.controls[(i * keep + j) * dm.control + k];
        }
        os << ',' << tr.z_path[g * (steps + 1) + i] << ',' << tr.psi[g * (steps + 1) + i] << '\n';
      }
  }
  auto os = open_out(cfg, "terminal_samples.csv");
  os << csv_header(cfg, command) << '\n' << "x0\n";
  for (double x : a.terminal_samples) os << x << '\n';
}

levelset::PolicySet load_for(const RunConfig& cfg, json& meta) {
  if (cfg.checkpoint.empty()) throw ConfigError("this command needs a checkpoint (--checkpoint or run.checkpoint)");
  auto set = levelset::load_checkpoint(cfg.checkpoint, &meta);
  if (meta.contains("benchmark") && meta["benchmark"] != cfg.benchmark)
    throw ConfigError("checkpoint was trained on '" + meta["benchmark"].get<std::string>() + "', config asks for '" +
                      cfg.benchmark + "'");
  return set;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

const char* version() { return MFLS_VERSION; }

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DimensionError*>(&e)) return config_error;
  if (dynamic_cast<const UndefinedValueError*>(&e)) return infeasible_grid;
  if (dynamic_cast<const DivergenceError*>(&e)) return diverged;
  return other_error;
}

json provenance(const RunConfig& cfg, const std::string& command) {
  return {{"mfls_version", version()},  {"config_hash", hash_hex(cfg.hash)},
          {"seed", cfg.seed},           {"benchmark", cfg.benchmark},
          {"scale", benchmarks::to_string(cfg.scale)}, {"command", command}};
}

std::string csv_header(const RunConfig& cfg, const std::string& command) {
  return "# mfls " + std::string(version()) + " command=" + command + " benchmark=" + cfg.benchmark +
         " config_hash=" + hash_hex(cfg.hash) + " seed=" + std::to_string(cfg.seed);
}

SolveReport run_solve(const RunConfig& cfg, std::ostream& log) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto spec = cfg.build_problem();
  SolveReport rep;
  log << "training " << cfg.benchmark << " (" << benchmarks::to_string(cfg.scale) << "), " << cfg.train.iterations
      << " iterations, N=" << cfg.train.particles << " K0=" << cfg.train.groups << '\n';
  rep.training = levelset::train(spec, cfg.train, [&](const levelset::TrainLogRow& row) {
    log << "  it " << row.iteration << "  loss " << row.loss << "  |g| " << row.grad_norm << "  " << row.seconds
        << " s\n";
  });
  const auto& curve = rep.training.curve;
  rep.value = curve.value;
  std::string affine_error;
  try {
    rep.affine = levelset::extract_value_affine(curve);
  } catch (const UndefinedValueError& e) {
    affine_error = e.what();
  }
  // Monte Carlo noise can keep every grid point above epsilon; the control is
  // then recovered at the root of the affine part.
  std::optional<double> recover_at = rep.value;
  std::string value_source = rep.value ? "epsilon" : "none";
  if (!recover_at && rep.affine) {
    recover_at = rep.affine->root;
    value_source = "affine";
  }

  {
    auto os = open_out(cfg, "curve.csv");
    os << csv_header(cfg, "solve") << '\n';
    curve.write_csv(os);
  }
  {
    auto os = open_out(cfg, "training_log.csv");
    os << csv_header(cfg, "solve") << '\n';
    levelset::write_training_log_csv(os, rep.training.log);
  }
  json meta = provenance(cfg, "solve");
  meta["value"] = optional_number(recover_at);
  meta["baseline_mean"] = rep.training.baseline_mean;
  meta["common"] = cfg.train.common;
  meta["use_baseline"] = cfg.train.use_baseline;
  levelset::save_checkpoint((fs::path(cfg.out) / "checkpoint.json").string(), rep.training.policies, meta);

  if (recover_at) {
    log << "V0 = " << *recover_at << " (" << value_source << "), auditing on " << cfg.evaluate.groups << " x " << cfg.evaluate.particles
        << " particles\n";
    const auto control = levelset::recover_control(rep.training.policies, recover_at, spec);
    rep.audit = levelset::audit_control(spec, control, cfg.evaluate.particles, cfg.evaluate.groups, cfg.seed,
                                        cfg.evaluate.keep_particles, cfg.train.parallel);
    write_audit_files(cfg, "solve", spec, *rep.audit);
  }

  const auto& log_rows = rep.training.log;
  rep.summary = provenance(cfg, "solve");
  rep.summary["status"] = recover_at ? "ok" : "infeasible_grid";
  rep.summary["value"] = optional_number(rep.value);
  rep.summary["value_source"] = value_source;
  rep.summary["recovered_at"] = optional_number(recover_at);
  rep.summary["value_affine"] = affine_json(rep.affine, affine_error);
  rep.summary["curve"] = {{"z_lo", curve.z.front()}, {"z_hi", curve.z.back()}, {"points", curve.size()},
                          {"epsilon", curve.epsilon}};
  rep.summary["training"] = {{"iterations", cfg.train.iterations},
                             {"final_loss", log_rows.empty() ? json(nullptr) : json(log_rows.back().loss)},
                             {"seconds", rep.training.train_seconds},
                             {"eval_seconds", rep.training.eval_seconds},
                             {"baseline_mean", rep.training.baseline_mean}};
  if (rep.audit) rep.summary["audit"] = audit_json(*rep.audit);
  if (cfg.benchmark == "mv-dual" || cfg.benchmark == "mv-primal" || cfg.benchmark == "trivial") {
    const auto o = benchmarks::oracle(cfg.problem);
    rep.summary["oracle"] = {{"method", o.method}, {"value", o.value}};
  }
  rep.summary["config"] = cfg.to_json();
  rep.summary["wall_seconds"] = seconds_since(t0);
  write_json(cfg, "summary.json", rep.summary);
  if (!recover_at)
    throw UndefinedValueError("no grid point of [" + std::to_string(cfg.train.z_lo) + ", " +
                              std::to_string(cfg.train.z_hi) + "] passes the level-set threshold; widen the grid");
  return rep;
}

levelset::LevelSetCurve run_curve(const RunConfig& cfg, std::ostream& log) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto spec = cfg.build_problem();
  json meta;
  const auto policies = load_for(cfg, meta);
  const double baseline = meta.value("baseline_mean", 0.0);
  const auto opts = levelset::engine_options(cfg.train, baseline);
  const std::size_t n = cfg.curve.particles ? cfg.curve.particles : cfg.train.eval_particles_or_default();
  const std::size_t g = cfg.curve.groups ? cfg.curve.groups : cfg.train.eval_groups_or_default();
  const std::size_t r = cfg.curve.replicates ? cfg.curve.replicates : cfg.train.eval_replicates;
  log << "evaluating " << cfg.train.grid_points << " grid points on " << r << " x " << g << " x " << n
      << " particles\n";
  auto curve = levelset::evaluate_curve(spec, policies, opts, cfg.train.grid(), cfg.train.epsilon, n, g, r,
                                        derive_seed(cfg.seed, "curve"));
  {
    auto os = open_out(cfg, "curve.csv");
    os << csv_header(cfg, "curve") << '\n';
    curve.write_csv(os);
  }
  std::optional<levelset::AffineFit> affine;
  std::string affine_error;
  try {
    affine = levelset::extract_value_affine(curve);
  } catch (const UndefinedValueError& e) {
    affine_error = e.what();
  }
  json summary = provenance(cfg, "curve");
  summary["checkpoint"] = cfg.checkpoint;
  summary["value"] = optional_number(curve.value);
  summary["value_affine"] = affine_json(affine, affine_error);
  summary["batch"] = {{"particles", n}, {"groups", g}, {"replicates", r}};
  summary["config"] = cfg.to_json();
  summary["wall_seconds"] = seconds_since(t0);
  write_json(cfg, "summary.json", summary);
  return curve;
}

levelset::AuditResult run_evaluate(const RunConfig& cfg, std::ostream& log) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto spec = cfg.build_problem();
  json meta;
  const auto policies = load_for(cfg, meta);
  std::optional<double> z0 = cfg.evaluate.z0;
  if (!z0 && meta.contains("value") && meta["value"].is_number()) z0 = meta["value"].get<double>();
  const auto control = levelset::recover_control(policies, z0, spec);
  log << "auditing the control at z = " << *z0 << " on " << cfg.evaluate.groups << " x " << cfg.evaluate.particles
      << " particles\n";
  auto audit = levelset::audit_control(spec, control, cfg.evaluate.particles, cfg.evaluate.groups, cfg.seed,
                                       cfg.evaluate.keep_particles, cfg.train.parallel);
  write_audit_files(cfg, "evaluate", spec, audit);
  json summary = provenance(cfg, "evaluate");
  summary["checkpoint"] = cfg.checkpoint;
  summary["z0"] = *z0;
  summary["audit"] = audit_json(audit);
  summary["config"] = cfg.to_json();
  summary["wall_seconds"] = seconds_since(t0);
  write_json(cfg, "summary.json", summary);
  return audit;
}

benchmarks::OracleResult run_oracle(const RunConfig& cfg, std::ostream& log) {
  const auto t0 = std::chrono::steady_clock::now();
  log << "reference value for " << cfg.benchmark << '\n';
  benchmarks::DpRefinement study;
  auto r = benchmarks::oracle(cfg.problem, cfg.dp, cfg.dp_levels, &study);
  json j = provenance(cfg, "oracle");
  j["method"] = r.method;
  j["value"] = r.value;
  j["details"] = r.details;
  j["wall_seconds"] = seconds_since(t0);
  write_json(cfg, "oracle.json", j);
  if (!study.levels.empty()) {
    auto os = open_out(cfg, "dp_slices.csv");
    os << csv_header(cfg, "oracle") << '\n';
    benchmarks::write_dp_slices_csv(os, study.levels.back());
    if (!study.converged)
      log << "warning: DP refinement changed the value by " << 100.0 * study.last_change << "% at the last level\n";
  }
  return r;
}

void list_benchmarks(std::ostream& os) {
  for (const auto& b : benchmarks::list_benchmarks()) os << b.id << "\t" << b.description << '\n';
}

}  // namespace mfls::cli
