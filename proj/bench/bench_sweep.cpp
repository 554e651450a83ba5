// Serial reference vs OpenMP kernels on a 13C FID sweep and a detuning ensemble.

#include <benchmark/benchmark.h>

#include "nvsim/config.hpp"
#include "nvsim/dynamics.hpp"

namespace {

using namespace nvsim;

SpinSystem fid_system() {
    SpinSystem sys;
    sys.field = {140.0, 26.0, 0.0};
    sys.nuclei = {carbon13_first_shell()};
    return sys;
}

SweepSpec taus(int n) {
    SweepSpec s{"tau", {}};
    for (int k = 0; k < n; ++k) s.values.push_back(0.004 * k);
    return s;
}

void BM_SweepSerial(benchmark::State &state) {
    const auto sys = fid_system();
    const auto seq = default_fid_sequence(eigensolve(build_hamiltonian(sys)));
    const auto sweep = taus(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(run_sequence_serial(sys, seq, sweep));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_SweepParallel(benchmark::State &state) {
    const auto sys = fid_system();
    const auto seq = default_fid_sequence(eigensolve(build_hamiltonian(sys)));
    const auto sweep = taus(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(run_sequence(sys, seq, sweep));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_EnsembleSerial(benchmark::State &state) {
    SpinSystem sys;
    sys.field = {100.0, 0.0, 0.0};
    auto seq = default_echo_sequence(eigensolve(build_hamiltonian(sys)));
    seq.readout.phase_cycle = true;
    const auto sweep = taus(50);
    for (auto _ : state)
        benchmark::DoNotOptimize(ensemble_average_serial(sys, seq, sweep, {2.0, {}}, static_cast<int>(state.range(0))));
}

void BM_EnsembleParallel(benchmark::State &state) {
    SpinSystem sys;
    sys.field = {100.0, 0.0, 0.0};
    auto seq = default_echo_sequence(eigensolve(build_hamiltonian(sys)));
    seq.readout.phase_cycle = true;
    const auto sweep = taus(50);
    for (auto _ : state)
        benchmark::DoNotOptimize(ensemble_average(sys, seq, sweep, {2.0, {}}, static_cast<int>(state.range(0))));
}

} // namespace

BENCHMARK(BM_SweepSerial)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SweepParallel)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_EnsembleSerial)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EnsembleParallel)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
