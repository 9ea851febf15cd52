// mfls: command-line front end.
//
//   mfls solve            --config run.ini [--seed N] [--out DIR] [--threads T] [--scale desk|paper]
//   mfls curve            --config run.ini --checkpoint DIR/checkpoint.json
//   mfls evaluate         --config run.ini --checkpoint DIR/checkpoint.json
//   mfls oracle           --config run.ini
//   mfls list-benchmarks
//
// Exit codes: 0 success, 2 configuration error, 3 grid does not bracket V0,
// 4 training diverged, 1 anything else.

#include <omp.h>

#include <iostream>

#include "CLI11.hpp"
#include "mfls/cli/commands.hpp"
#include "mfls/util/error.hpp"

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out, scale, checkpoint;
  std::optional<int> threads;
};

void add_common(CLI::App* cmd, Common& c, bool checkpoint) {
  cmd->add_option("--config,-c", c.config, "INI run configuration")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "master seed (overrides run.seed)");
  cmd->add_option("--out,-o", c.out, "output directory (overrides run.out)");
  cmd->add_option("--threads", c.threads, "OpenMP threads")->check(CLI::PositiveNumber);
  cmd->add_option("--scale", c.scale, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
  if (checkpoint) cmd->add_option("--checkpoint", c.checkpoint, "checkpoint.json written by solve");
}

mfls::cli::RunConfig load(const Common& c) {
  mfls::cli::Overrides ov{c.seed, c.out, c.threads, c.scale, c.checkpoint};
  auto cfg = mfls::cli::load_config(c.config, ov);
  if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean-field control under law constraints by the level-set method"};
  app.set_version_flag("--version", std::string(mfls::cli::version()));
  app.require_subcommand(1);
  Common common;
  auto* solve = app.add_subcommand("solve", "train, extract V0 and audit the recovered control");
  auto* curve = app.add_subcommand("curve", "re-evaluate the level-set curve of a checkpoint");
  auto* evaluate = app.add_subcommand("evaluate", "simulate the control recovered from a checkpoint");
  auto* oracle = app.add_subcommand("oracle", "reference value of the benchmark");
  app.add_subcommand("list-benchmarks", "print the available benchmark ids");
  add_common(solve, common, false);
  add_common(curve, common, true);
  add_common(evaluate, common, true);
  add_common(oracle, common, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : mfls::cli::config_error;
  }

  try {
    if (app.got_subcommand("list-benchmarks")) {
      mfls::cli::list_benchmarks(std::cout);
      return 0;
    }
    const auto cfg = load(common);
    if (solve->parsed()) {
      const auto rep = mfls::cli::run_solve(cfg, std::cerr);
      std::cout << "V0 = " << rep.summary["recovered_at"].get<double>() << " ("
                << rep.summary["value_source"].get<std::string>() << ")\n";
    } else if (curve->parsed()) {
      const auto c = mfls::cli::run_curve(cfg, std::cerr);
      if (c.value) std::cout << "V0 = " << *c.value << '\n';
      else std::cout << "no grid point passes the level-set threshold; see value_affine in summary.json\n";
    } else if (evaluate->parsed()) {
      const auto a = mfls::cli::run_evaluate(cfg, std::cerr);
      std::cout << "cost = " << a.cost << " +- " << a.cost_stderr << '\n';
    } else if (oracle->parsed()) {
      const auto r = mfls::cli::run_oracle(cfg, std::cerr);
      std::cout << "reference = " << r.value << " (" << r.method << ")\n";
    }
    std::cout << "outputs in " << cfg.out << '\n';
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "mfls: " << e.what() << '\n';
    return mfls::cli::exit_code_for(e);
  }
}
