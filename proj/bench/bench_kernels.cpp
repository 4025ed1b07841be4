#include <benchmark/benchmark.h>

#include "mgpin/dynamics.hpp"
#include "mgpin/pindecide.hpp"
#include "mgpin/pinlearn.hpp"
#include "mgpin/powerflow.hpp"

#ifndef MGPIN_DATA_DIR
#define MGPIN_DATA_DIR "data"
#endif

using namespace mgpin;

namespace {

PinningProblem bench_problem(int m) {
  Rng rng(derive_seed(7, "bench"));
  return PinningProblem{small_world(m, 4, 0.2, rng), 30.0, 1.0, 10.0};
}

void BM_Exhaustive(benchmark::State& st) {
  const PinningProblem p = bench_problem(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(exhaustive_pinning(p));
}
void BM_ExhaustiveSerial(benchmark::State& st) {
  const PinningProblem p = bench_problem(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(exhaustive_pinning_serial(p));
}
BENCHMARK(BM_Exhaustive)->Arg(10)->Arg(14)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ExhaustiveSerial)->Arg(10)->Arg(14)->Unit(benchmark::kMillisecond);

DatasetParams bench_dataset() {
  DatasetParams p;
  p.count = 200;
  p.disruption.max_removals = 4;
  p.seed = 11;
  return p;
}
void BM_GenDataset(benchmark::State& st) {
  const DatasetParams p = bench_dataset();
  for (auto _ : st) benchmark::DoNotOptimize(gen_dataset(p));
}
void BM_GenDatasetSerial(benchmark::State& st) {
  const DatasetParams p = bench_dataset();
  for (auto _ : st) benchmark::DoNotOptimize(gen_dataset_serial(p));
}
BENCHMARK(BM_GenDataset)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GenDatasetSerial)->Unit(benchmark::kMillisecond);

struct DynFixture {
  MicrogridSystem sys;
  Eigen::VectorXd x;
  ode::Rhs rhs;
  Eigen::VectorXd f0;
  static DynFixture make() {
    const NetworkModel net = read_network(MGPIN_DATA_DIR "/microgrid38.net");
    const PowerFlowSolution sol = solve_power_flow(net, PfSettings{});
    const int m = net.dg_count();
    std::vector<Edge> e;
    for (int i = 0; i + 1 < m; ++i) e.emplace_back(i, i + 1);
    DynFixture f{MicrogridSystem(net, CommGraph(m, e), PinningSet::from_indices(m, {0}), ControlGains::uniform(30, 1)),
                 extract_steady_state(sol, net), {}, {}};
    return f;
  }
};

void BM_FdJacobian(benchmark::State& st) {
  DynFixture f = DynFixture::make();
  const ode::Rhs rhs = [&](double t, const Eigen::VectorXd& y, Eigen::VectorXd& dy) { system_derivs(f.sys, t, y, dy); };
  const Eigen::VectorXd f0 = system_derivs(f.sys, 0.0, f.x);
  for (auto _ : st) benchmark::DoNotOptimize(ode::fd_jacobian(rhs, 0.0, f.x, f0));
}
void BM_FdJacobianSerial(benchmark::State& st) {
  DynFixture f = DynFixture::make();
  const ode::Rhs rhs = [&](double t, const Eigen::VectorXd& y, Eigen::VectorXd& dy) { system_derivs(f.sys, t, y, dy); };
  const Eigen::VectorXd f0 = system_derivs(f.sys, 0.0, f.x);
  for (auto _ : st) benchmark::DoNotOptimize(ode::fd_jacobian_serial(rhs, 0.0, f.x, f0));
}
BENCHMARK(BM_FdJacobian)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FdJacobianSerial)->Unit(benchmark::kMillisecond);

void BM_PfJacobian(benchmark::State& st) {
  const NetworkModel net = read_network(MGPIN_DATA_DIR "/microgrid38.net");
  const PfSettings s;
  const Eigen::VectorXd w = pack_unknowns(flat_start(net, s));
  for (auto _ : st) benchmark::DoNotOptimize(mismatch_jacobian(w, net, s, 1e-6));
}
void BM_PfJacobianSerial(benchmark::State& st) {
  const NetworkModel net = read_network(MGPIN_DATA_DIR "/microgrid38.net");
  const PfSettings s;
  const Eigen::VectorXd w = pack_unknowns(flat_start(net, s));
  for (auto _ : st) benchmark::DoNotOptimize(mismatch_jacobian_serial(w, net, s, 1e-6));
}
BENCHMARK(BM_PfJacobian)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_PfJacobianSerial)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
