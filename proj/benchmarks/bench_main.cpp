#include <benchmark/benchmark.h>

#include <random>

#include "admmopt/admm.hpp"
#include "admmopt/cmab.hpp"
#include "admmopt/gp.hpp"
#include "admmopt/logging.hpp"
#include "admmopt/synthetic.hpp"

using namespace admmopt;

namespace {

GpModel random_model(Eigen::Index n, Eigen::Index d, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd x(n, d);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = u(rng);
    y(i) = std::sin(6.0 * x(i, 0)) + 0.1 * u(rng);
  }
  GpModel gp(KernelParams{1.0, std::vector<double>(static_cast<std::size_t>(d), 0.3)}, 1e-3);
  gp.set_data(x, y);
  return gp;
}

void BM_GpPosterior(benchmark::State& state) {
  Rng rng(1);
  const GpModel gp = random_model(state.range(0), 5, rng);
  std::vector<double> q(5, 0.4);
  for (auto _ : state) benchmark::DoNotOptimize(gp.posterior(q));
}
BENCHMARK(BM_GpPosterior)->Arg(16)->Arg(64)->Arg(120);

void BM_GpSetData(benchmark::State& state) {
  Rng rng(2);
  GpModel gp = random_model(state.range(0), 5, rng);
  const Eigen::MatrixXd x = gp.train_x();
  const Eigen::VectorXd y = gp.train_y();
  for (auto _ : state) gp.set_data(x, y);
}
BENCHMARK(BM_GpSetData)->Arg(16)->Arg(64)->Arg(120);

void BM_GpFitHyperparams(benchmark::State& state) {
  Rng rng(3);
  const GpModel gp = random_model(state.range(0), 5, rng);
  for (auto _ : state) benchmark::DoNotOptimize(fit_hyperparams(gp, rng));
}
BENCHMARK(BM_GpFitHyperparams)->Arg(32)->Arg(120)->Unit(benchmark::kMillisecond);

void BM_CmabRound(benchmark::State& state) {
  const std::vector<std::size_t> counts(static_cast<std::size_t>(state.range(0)), 4);
  BanditState bandit(counts, {});
  Rng rng(4);
  RngArmSampler sampler(rng);
  auto loss = [](const ZAssignment& z) { return z.choice[0] == 0 ? 0.1 : 0.5; };
  for (auto _ : state) benchmark::DoNotOptimize(cmab_round(bandit, loss, sampler));
}
BENCHMARK(BM_CmabRound)->Arg(3)->Arg(12);

void BM_AdmmRunMixed(benchmark::State& state) {
  set_log_level("off");
  auto bench = make_builtin("mixed");
  for (auto _ : state) {
    BayesOptSolver theta;
    auto z = make_combinatorial_solver("cmab");
    AdmmOptions o;
    o.max_evals = static_cast<std::size_t>(state.range(0));
    o.seed = 1;
    benchmark::DoNotOptimize(run_admm(bench->space(), *bench, theta, *z, o));
  }
}
BENCHMARK(BM_AdmmRunMixed)->Arg(100)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
