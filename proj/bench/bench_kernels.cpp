#include <benchmark/benchmark.h>

#include <random>

#include "imbal/kernels.hpp"
#include "imbal/policy_correction.hpp"

using namespace imbal;

namespace {

const FeedForwardNet& net() {
  static const FeedForwardNet n = FeedForwardNet::initialized({5, 256, 128, 153}, 1);
  return n;
}

Eigen::MatrixXd inputs(Eigen::Index cols) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd x(5, cols);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);
  return x;
}

void BM_ForwardSerial(benchmark::State& st) {
  const auto x = inputs(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(kernels::serial::forward_batch(net(), x));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_ForwardParallel(benchmark::State& st) {
  const auto x = inputs(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(kernels::parallel::forward_batch(net(), x));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_BackwardSerial(benchmark::State& st) {
  const auto x = inputs(st.range(0));
  const Eigen::MatrixXd up = Eigen::MatrixXd::Ones(153, st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(kernels::serial::backward_batch(net(), x, up));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_BackwardParallel(benchmark::State& st) {
  const auto x = inputs(st.range(0));
  const Eigen::MatrixXd up = Eigen::MatrixXd::Ones(153, st.range(0));
  for (auto _ : st) {
    const auto cache = kernels::parallel::forward_cached(net(), x);
    benchmark::DoNotOptimize(kernels::parallel::backward_batch(net(), cache, up));
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

void projection(benchmark::State& st, Exec exec) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto n = static_cast<std::size_t>(st.range(0));
  std::vector<Probs> p(n);
  std::vector<EnvState> states(n);
  for (std::size_t i = 0; i < n; ++i) {
    double a = u(rng), b = u(rng), c = u(rng), s = a + b + c;
    p[i] = {a / s, b / s, c / s};
    states[i] = {0, 40, 1, 0.1 + 0.9 * u(rng), -1000.0 + 3000.0 * u(rng)};
  }
  const ConstraintConfig cfg;
  std::vector<Action> hints(n, Action::kIdle);
  const ConstraintSet cs = build_constraints(states, cfg, hints);
  for (auto _ : st) benchmark::DoNotOptimize(project_policy(p, cs, exec));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_ProjectSerial(benchmark::State& st) { projection(st, Exec::kSerial); }
void BM_ProjectParallel(benchmark::State& st) { projection(st, Exec::kParallel); }

}  // namespace

BENCHMARK(BM_ForwardSerial)->Arg(1024)->Arg(16384);
BENCHMARK(BM_ForwardParallel)->Arg(1024)->Arg(16384);
BENCHMARK(BM_BackwardSerial)->Arg(1024);
BENCHMARK(BM_BackwardParallel)->Arg(1024);
BENCHMARK(BM_ProjectSerial)->Arg(4096);
BENCHMARK(BM_ProjectParallel)->Arg(4096);

BENCHMARK_MAIN();
