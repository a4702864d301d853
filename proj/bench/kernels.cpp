#include <benchmark/benchmark.h>

#include <map>
#include <memory>

#include "polyclf/pipeline.hpp"
#include "polyclf/synth.hpp"

using namespace polyclf;

namespace {

const Problem& problem() {
  static const Problem p = nominal_example();
  return p;
}

struct Sweep {
  GridFunction grid;
  BellmanProblem bp;
};

Sweep& sweep(int res) {
  static std::map<int, Sweep> cache;
  auto it = cache.find(res);
  if (it == cache.end()) {
    const auto& p = problem();
    static const StageCost cost = StageCost::quadratic(p.Q, p.R);
    ValueIterationOptions o;
    o.grid_res = res;
    o.max_iter = 3;
    Sweep s;
    s.grid = value_iteration(p.sys, cost, p.sys.X, nullptr, o);
    s.bp = make_bellman_problem(p.sys, cost, p.sys.X, nullptr, s.grid, o.u_res);
    it = cache.emplace(res, std::move(s)).first;
  }
  return it->second;
}

void BM_BellmanSweepSerial(benchmark::State& st) {
  auto& s = sweep(static_cast<int>(st.range(0)));
  Mat out;
  for (auto _ : st) {
    bellman_sweep_serial(s.bp, s.grid, out);
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_BellmanSweepParallel(benchmark::State& st) {
  auto& s = sweep(static_cast<int>(st.range(0)));
  Mat out;
  for (auto _ : st) {
    bellman_sweep_parallel(s.bp, s.grid, out);
    benchmark::DoNotOptimize(out.data());
  }
}

struct Batch {
  std::unique_ptr<PwaFunction> M;
  std::vector<Vec> xs;
};

Batch& batch() {
  static Batch b = [] {
    const auto& p = problem();
    const auto a = build_template(p, TemplateConfig{});
    const auto s = make_spec(p, a, SynthConfig{});
    const auto r = synthesize(s);
    Batch out;
    out.M = std::make_unique<PwaFunction>(make_function(s, r));
    out.xs = sample_domain(*out.M, 100000, 1);
    return out;
  }();
  return b;
}

void BM_EvalBatchSerial(benchmark::State& st) {
  auto& b = batch();
  for (auto _ : st) benchmark::DoNotOptimize(b.M->eval_batch_serial(b.xs).sum());
}

void BM_EvalBatchParallel(benchmark::State& st) {
  auto& b = batch();
  for (auto _ : st) benchmark::DoNotOptimize(b.M->eval_batch_parallel(b.xs).sum());
}

void zeta_rows(benchmark::State& st, bool parallel) {
  const auto& p = problem();
  const auto td = make_template_s1_on_domain(polygon_directions(8), static_cast<int>(st.range(0)), 1);
  const auto cost = StageCost::quadratic(p.Q, p.R);
  const auto P = problem_lqr(p);
  ZetaOptions o;
  o.parallel = parallel;
  for (auto _ : st) benchmark::DoNotOptimize(zeta_nominal(td.F, p.sys, cost, &P, 5, o).sum());
}

void BM_ZetaSerial(benchmark::State& st) { zeta_rows(st, false); }
void BM_ZetaParallel(benchmark::State& st) { zeta_rows(st, true); }

}  // namespace

BENCHMARK(BM_BellmanSweepSerial)->Arg(101)->Arg(301)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BellmanSweepParallel)->Arg(101)->Arg(301)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvalBatchSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvalBatchParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ZetaSerial)->Arg(37)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ZetaParallel)->Arg(37)->Arg(200)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
