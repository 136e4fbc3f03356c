#include <benchmark/benchmark.h>

#include <random>

#include "posl/engine.hpp"

namespace {

posl::PanelDataset panel(int n, int sessions) {
  posl::SimulationConfig c;
  c.n_individuals = n;
  c.min_sessions = sessions;
  c.max_sessions = sessions;
  return posl::simulate_panel(c);
}

posl::Library library() {
  posl::LearnerSpec mean, linear, gbt;
  mean.family = posl::Family::mean;
  linear.family = posl::Family::linear;
  gbt.family = posl::Family::gbt;
  gbt.hyper["rounds"] = 20;
  return posl::make_library({mean, linear}, {mean, linear, gbt}, posl::OutcomeMode::continuous);
}

void BM_working_sample(benchmark::State& state) {
  const auto data = panel(8, 60);
  const auto lib = library();
  posl::PoslSettings s;
  s.execution = state.range(0) ? posl::Execution::parallel : posl::Execution::serial;
  for (auto _ : state) benchmark::DoNotOptimize(posl::run_working_sample(data, lib, s, 1));
}
BENCHMARK(BM_working_sample)->Arg(0)->Arg(1)->ArgNames({"parallel"})->Unit(benchmark::kMillisecond);

void BM_rf_screen(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  const int n = 2000, p = 12;
  Eigen::MatrixXd x(n, p);
  std::vector<double> y(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) x(i, j) = z(rng);
    y[i] = 2 * x(i, 0) - x(i, 3) + z(rng);
  }
  posl::ForestOptions o;
  o.execution = state.range(0) ? posl::Execution::parallel : posl::Execution::serial;
  for (auto _ : state) benchmark::DoNotOptimize(posl::rf_importance_screen(x, y, 5, 100, 1, o));
}
BENCHMARK(BM_rf_screen)->Arg(0)->Arg(1)->ArgNames({"parallel"})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
