#include <benchmark/benchmark.h>

#include "spii/capfactor.hpp"
#include "spii/markov.hpp"
#include "spii/region.hpp"
#include "spii/rng.hpp"
#include "spii/sim.hpp"

namespace {

using namespace spii;

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

ExperimentConfig mw_config(long long horizon) {
  ExperimentConfig cfg;
  cfg.schedules = single_server_set(2);
  cfg.channel = symmetric_channel(2, 0.5);
  cfg.lambda = vec2(0.3, 0.3);
  cfg.policy = MwPolicy{direct_index_allocation(2, cfg.schedules)};
  cfg.horizon = horizon;
  cfg.seed = 1;
  cfg.stability.window = horizon / 20;
  return cfg;
}

void BM_TrajectorySlots(benchmark::State& state) {
  ExperimentConfig cfg = mw_config(state.range(0));
  for (auto _ : state) {
    TrajectoryRecord rec = run_trajectory(cfg);
    benchmark::DoNotOptimize(rec.max_queue);
  }
  state.SetItemsProcessed(state.iterations() * cfg.horizon);
}
BENCHMARK(BM_TrajectorySlots)->Arg(100000)->Arg(400000);

void BM_Stationary(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(7);
  Eigen::MatrixXd t(n, n);
  for (int i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
      t(i, j) = 0.01 + rng.next_unit();
      sum += t(i, j);
    }
    t.row(i) /= sum;
  }
  for (auto _ : state) {
    StationaryDistribution sd = stationary(t);
    benchmark::DoNotOptimize(sd.residual);
  }
}
BENCHMARK(BM_Stationary)->Arg(16)->Arg(64)->Arg(256);

void BM_BoundaryProjection(benchmark::State& state) {
  ScheduleSet pi = make_schedule_set(monotone_closure({{2, 0}, {1, 1}, {0, 2}}));
  Rng rng(11);
  for (auto _ : state) {
    Eigen::VectorXd x = vec2(0.1 + rng.next_unit(), 0.1 + rng.next_unit());
    benchmark::DoNotOptimize(proj_boundary(x, pi));
  }
}
BENCHMARK(BM_BoundaryProjection);

void BM_OptimizeV0(benchmark::State& state) {
  ScheduleSet pi = single_server_set(static_cast<int>(state.range(0)));
  Channel c = symmetric_channel(static_cast<int>(state.range(0)), 0.5);
  OptimOptions opt;
  opt.starts = 4;
  for (auto _ : state) {
    CapFactorResult res = optimize_v0(pi, c, opt);
    benchmark::DoNotOptimize(res.rho);
  }
}
BENCHMARK(BM_OptimizeV0)->Arg(2)->Arg(5);

}  // namespace

BENCHMARK_MAIN();
