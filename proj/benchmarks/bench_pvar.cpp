#include <benchmark/benchmark.h>

#include "causal_pvar/causal_lab.hpp"
#include "causal_pvar/diagnostics.hpp"
#include "causal_pvar/estimands.hpp"
#include "causal_pvar/identify.hpp"
#include "causal_pvar/panel.hpp"

using namespace causal_pvar;
using Eigen::MatrixXd;

namespace {

PanelDataset var_panel(std::size_t n_units, std::size_t n_times, std::size_t m) {
  VarDgp dgp;
  dgp.phi = {0.3 * MatrixXd::Identity(Eigen::Index(m), Eigen::Index(m))};
  dgp.sigma = MatrixXd::Identity(Eigen::Index(m), Eigen::Index(m));
  dgp.n_units = n_units;
  dgp.n_times = n_times;
  dgp.seed = 1;
  return simulate_pvar(dgp);
}

}  // namespace

static void BM_FitPvar(benchmark::State& state) {
  const PanelDataset panel = var_panel(std::size_t(state.range(0)), 200, std::size_t(state.range(1)));
  PVARSpec spec;
  spec.lag_order = 2;
  for (auto _ : state) benchmark::DoNotOptimize(fit_pvar(panel, spec));
  state.SetItemsProcessed(state.iterations() * std::int64_t(panel.values.rows()));
}
BENCHMARK(BM_FitPvar)->Args({50, 2})->Args({200, 2})->Args({200, 6})->Unit(benchmark::kMillisecond);

static void BM_BootstrapIrf(benchmark::State& state) {
  const PanelDataset panel = var_panel(50, 100, 2);
  BootstrapOptions opt;
  opt.reps = std::size_t(state.range(0));
  opt.seed = 3;
  for (auto _ : state) benchmark::DoNotOptimize(bootstrap_irf(panel, {}, 0, 10, opt));
}
BENCHMARK(BM_BootstrapIrf)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

static void BM_LagCriteria(benchmark::State& state) {
  const PanelDataset panel = var_panel(100, 300, 2);
  for (auto _ : state) benchmark::DoNotOptimize(lag_criteria(panel, std::size_t(state.range(0))));
}
BENCHMARK(BM_LagCriteria)->Arg(4)->Arg(6)->Unit(benchmark::kMillisecond);

static void BM_SimulateScenario(benchmark::State& state) {
  ScenarioConfig c;
  c.regime = static_cast<Regime>(state.range(0));
  c.seed = 5;
  for (auto _ : state) benchmark::DoNotOptimize(simulate_scenario(c));
}
BENCHMARK(BM_SimulateScenario)->DenseRange(0, 4)->Unit(benchmark::kMillisecond);

static void BM_OracleEstimands(benchmark::State& state) {
  ScenarioConfig c;
  c.regime = Regime::GaussianContinuous;
  c.seed = 5;
  const Simulation sim = simulate_scenario(c);
  for (auto _ : state) benchmark::DoNotOptimize(oracle_estimands(sim.truth));
}
BENCHMARK(BM_OracleEstimands)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
