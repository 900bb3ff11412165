#include <benchmark/benchmark.h>

#include "fedapm/baselines.hpp"
#include "fedapm/datagen.hpp"
#include "fedapm/diagnostics.hpp"
#include "fedapm/engine.hpp"
#include "fedapm/experiment.hpp"

namespace {

using namespace fedapm;

void BM_QuadraticRound(benchmark::State& st) {
  QuadraticSpec spec;
  spec.m = static_cast<int>(st.range(0));
  const QuadraticProblem qp = make_quadratic_problem(spec);
  const auto lip = estimate_all(qp.objectives, 8, 0);
  std::vector<double> alphas(qp.objectives.size(), 1.0 / spec.m);
  const Hyperparams hp = auto_hyperparams(lip, alphas);
  EngineConfig cfg;
  cfg.rho = hp.rho;
  cfg.sigma = hp.sigma;
  cfg.mu = 0.85;
  FederationState state = init_federation(qp.objectives, lip, cfg);
  for (auto _ : st) {
    if (state.round > 150) state = init_federation(qp.objectives, lip, cfg);
    run_round(state, qp.objectives, InnerConfig{});
  }
}
BENCHMARK(BM_QuadraticRound)->Arg(8)->Arg(32);

void BM_SoftmaxRound(benchmark::State& st) {
  SyntheticSpec spec;
  const ClassificationProblem cp = make_classification_problem(spec);
  const bool apm = st.range(0) == 0;
  InnerConfig inner;
  inner.u_max_passes = 3;
  inner.v_max_iters = 20;
  FederationState state;
  if (apm) {
    const auto lip = estimate_all(cp.objectives, 8, 0);
    std::vector<double> alphas(cp.objectives.size(), 1.0 / spec.m);
    EngineConfig cfg;
    cfg.rho = 0.01;
    cfg.sigma = auto_sigma(cfg.rho, lip, alphas);
    cfg.selection_fraction = 0.3;
    cfg.init_scale = 0.1;
    state = init_federation(cp.objectives, lip, cfg);
  } else {
    state = init_baseline(cp.objectives, BaselineMethod::fedalt, 0.3, 0, 0.1);
  }
  LocalSgdConfig sgd;
  for (auto _ : st) {
    if (apm) {
      run_round(state, cp.objectives, inner);
    } else {
      fedalt_round(state, cp.objectives, sgd);
    }
  }
  st.SetLabel(apm ? "fedapm" : "fedalt");
}
BENCHMARK(BM_SoftmaxRound)->Arg(0)->Arg(1);

void BM_TheoryRow(benchmark::State& st) {
  QuadraticSpec spec;
  const QuadraticProblem qp = make_quadratic_problem(spec);
  const auto lip = estimate_all(qp.objectives, 8, 0);
  std::vector<double> alphas(qp.objectives.size(), 1.0 / spec.m);
  const Hyperparams hp = auto_hyperparams(lip, alphas);
  EngineConfig cfg;
  cfg.rho = hp.rho;
  cfg.sigma = hp.sigma;
  FederationState prev = init_federation(qp.objectives, lip, cfg);
  FederationState next = prev;
  run_round(next, qp.objectives, InnerConfig{});
  for (auto _ : st) benchmark::DoNotOptimize(make_theory_row(prev, next, qp.objectives, true));
}
BENCHMARK(BM_TheoryRow);

}  // namespace

BENCHMARK_MAIN();
