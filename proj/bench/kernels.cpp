// Serial reference loss against the batched engine, with and without OpenMP.
// Run with OMP_NUM_THREADS set to the number of cores to compare.

#include <benchmark/benchmark.h>

#include <vector>

#include "mfls/benchmarks/registry.hpp"
#include "mfls/levelset/engine.hpp"
#include "mfls/levelset/loss.hpp"

using namespace mfls;

namespace {

struct Fixture {
  dynamics::ProblemSpec spec;
  levelset::PolicySet policies;
  dynamics::NoisePlan noise;
  constraints::PenaltyMode penalty;

  Fixture(const char* id, std::size_t groups, std::size_t particles) : spec(benchmarks::build_problem(id)) {
    const auto cfg = benchmarks::default_train_config(id, benchmarks::Scale::desk);
    policies = levelset::PolicySet::build(spec, cfg.arch, cfg.common, 1);
    noise = dynamics::NoisePlan::generate(spec, groups, particles, 1, "bench");
    penalty = cfg.penalty;
  }
  std::vector<double> z() const { return std::vector<double>(noise.groups, spec.sign() * 40.0); }
};

void BM_ReferenceLoss(benchmark::State& state) {
  const Fixture f("mv-dual", 1, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(levelset::auxiliary_loss_group(f.spec, f.policies, -1.05, f.noise, 0, f.penalty));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void engine_loss(benchmark::State& state, bool parallel) {
  const Fixture f("mv-dual", 1, static_cast<std::size_t>(state.range(0)));
  levelset::EngineOptions opt;
  opt.parallel = parallel;
  const levelset::AuxiliaryEngine engine(f.spec, opt);
  const std::vector<double> z{-1.05};
  for (auto _ : state) benchmark::DoNotOptimize(engine.evaluate(f.policies, z, f.noise));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void engine_gradient(benchmark::State& state, const char* id, bool parallel) {
  const bool storage = std::string(id) == "storage";
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const Fixture f(id, storage ? n : 1, storage ? 1 : n);
  auto opt = levelset::engine_options(benchmarks::default_train_config(id, benchmarks::Scale::desk));
  opt.parallel = parallel;
  const levelset::AuxiliaryEngine engine(f.spec, opt);
  std::vector<double> grad(f.policies.parameter_count());
  const auto z = storage ? f.z() : std::vector<double>{-1.05};
  for (auto _ : state) benchmark::DoNotOptimize(engine.gradient(f.policies, z, f.noise, grad));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_EngineLossSerial(benchmark::State& s) { engine_loss(s, false); }
void BM_EngineLossOpenMP(benchmark::State& s) { engine_loss(s, true); }
void BM_MarkowitzGradientSerial(benchmark::State& s) { engine_gradient(s, "mv-dual", false); }
void BM_MarkowitzGradientOpenMP(benchmark::State& s) { engine_gradient(s, "mv-dual", true); }
void BM_StorageGradientSerial(benchmark::State& s) { engine_gradient(s, "storage", false); }
void BM_StorageGradientOpenMP(benchmark::State& s) { engine_gradient(s, "storage", true); }

}  // namespace

BENCHMARK(BM_ReferenceLoss)->Arg(4096)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EngineLossSerial)->Arg(4096)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EngineLossOpenMP)->Arg(4096)->Arg(20000)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_MarkowitzGradientSerial)->Arg(4096)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MarkowitzGradientOpenMP)->Arg(4096)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_StorageGradientSerial)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_StorageGradientOpenMP)->Arg(256)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
