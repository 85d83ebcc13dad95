#include <benchmark/benchmark.h>

#include "moniqua/algos.hpp"
#include "moniqua/codec.hpp"

// Parallel kernels against the serial reference on a large model. The two
// must agree bit for bit (tested in tests/test_algos.cpp); here we compare
// throughput only.

namespace {

using namespace moniqua;

struct Fixture {
  CommMatrix m = ring_matrix(8, false);
  QuantizerSpec q;
  ModuloCodec codec;
  CounterRng rng{42, Stream::QuantShared};
  std::vector<WorkerState> states;
  std::vector<std::vector<double>> grads;

  explicit Fixture(int dim) {
    q = quantizer_for_delta(QuantKind::NearestRound, 0.004);
    codec = ModuloCodec::from_quantizer(1.0, q);
    states = init_states(8, dim);
    grads.assign(8, std::vector<double>(dim));
    const CounterRng gen(7, Stream::Test);
    for (int i = 0; i < 8; ++i)
      for (int c = 0; c < dim; ++c) {
        states[i].x[c] = 0.02 * gen.sym(i, c);
        grads[i][c] = gen.sym(100 + i, c);
      }
  }
};

void bench_moniqua_step_parallel(benchmark::State& state) {
  Fixture f(static_cast<int>(state.range(0)));
  ConsensusGuard guard;
  std::uint64_t k = 0;
  for (auto _ : state) {
    step_moniqua(f.states, f.m, f.codec, f.q, 1e-4, f.grads, f.rng, k++, guard);
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * 8 * state.range(0));
}

void bench_moniqua_step_serial(benchmark::State& state) {
  Fixture f(static_cast<int>(state.range(0)));
  ConsensusGuard guard;
  std::uint64_t k = 0;
  for (auto _ : state) {
    ref::step_moniqua(f.states, f.m, f.codec, f.q, 1e-4, f.grads, f.rng, k++, guard);
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * 8 * state.range(0));
}

void bench_dpsgd_step_parallel(benchmark::State& state) {
  Fixture f(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    step_dpsgd_full(f.states, f.m, 1e-4, f.grads);
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * 8 * state.range(0));
}

void bench_dpsgd_step_serial(benchmark::State& state) {
  Fixture f(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    ref::step_dpsgd_full(f.states, f.m, 1e-4, f.grads);
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * 8 * state.range(0));
}

BENCHMARK(bench_moniqua_step_parallel)->Arg(1 << 12)->Arg(1 << 16)->Arg(1 << 18);
BENCHMARK(bench_moniqua_step_serial)->Arg(1 << 12)->Arg(1 << 16)->Arg(1 << 18);
BENCHMARK(bench_dpsgd_step_parallel)->Arg(1 << 16)->Arg(1 << 18);
BENCHMARK(bench_dpsgd_step_serial)->Arg(1 << 16)->Arg(1 << 18);

}  // namespace

BENCHMARK_MAIN();
