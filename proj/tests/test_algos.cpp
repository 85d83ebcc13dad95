#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "moniqua/algos.hpp"
#include "moniqua/error.hpp"

using namespace moniqua;

namespace {

std::vector<std::vector<double>> random_grads(int n, int d, std::uint64_t tag) {
  const CounterRng rng(tag, Stream::Test);
  std::vector<std::vector<double>> g(n, std::vector<double>(d));
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < d; ++c) g[i][c] = rng.sym(i, c);
  return g;
}

std::vector<double> mean_of(const std::vector<WorkerState>& s) {
  std::vector<double> m(s[0].x.size(), 0.0);
  for (const WorkerState& w : s)
    for (std::size_t c = 0; c < m.size(); ++c) m[c] += w.x[c] / s.size();
  return m;
}

void perturb(std::vector<WorkerState>& s, double scale, std::uint64_t tag) {
  const CounterRng rng(tag, Stream::Test);
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t c = 0; c < s[i].x.size(); ++c) s[i].x[c] += scale * rng.sym(i, c);
}

}  // namespace

TEST_CASE("full-precision stepper") {
  SUBCASE("complete graph with zero gradients averages in one step") {
    const CommMatrix m = complete_matrix(4);
    auto states = init_states(4, 3);
    perturb(states, 1.0, 1);
    const std::vector<double> mean = mean_of(states);
    std::vector<std::vector<double>> zeros(4, std::vector<double>(3, 0.0));
    step_dpsgd_full(states, m, 0.1, zeros);
    for (const WorkerState& w : states)
      for (std::size_t c = 0; c < 3; ++c) REQUIRE(w.x[c] == doctest::Approx(mean[c]).epsilon(1e-14));
  }
  SUBCASE("the averaged model takes the exact mean gradient step") {
    const CommMatrix m = ring_matrix(8, false);
    auto states = init_states(8, 5);
    perturb(states, 0.5, 2);
    const auto grads = random_grads(8, 5, 3);
    const std::vector<double> before = mean_of(states);
    step_dpsgd_full(states, m, 0.2, grads);
    const std::vector<double> after = mean_of(states);
    for (std::size_t c = 0; c < 5; ++c) {
      double gbar = 0.0;
      for (int i = 0; i < 8; ++i) gbar += grads[i][c] / 8.0;
      REQUIRE(std::abs(after[c] - (before[c] - 0.2 * gbar)) <= 1e-12);
    }
  }
  SUBCASE("dimension mismatches are state errors") {
    const CommMatrix m = ring_matrix(4, false);
    auto states = init_states(4, 3);
    std::vector<std::vector<double>> bad(4, std::vector<double>(2, 0.0));
    CHECK_THROWS_AS(step_dpsgd_full(states, m, 0.1, bad), Error);
  }
  SUBCASE("a single worker takes a plain gradient step") {
    const CommMatrix m = CommMatrix::from_weights(1, {1.0});
    CHECK(m.rho() == doctest::Approx(0.0));
    auto states = init_states(1, 2);
    states[0].x = {0.4, -0.2};
    std::vector<std::vector<double>> grads{{1.0, 2.0}};
    step_dpsgd_full(states, m, 0.1, grads);
    CHECK(states[0].x[0] == doctest::Approx(0.3));
    CHECK(states[0].x[1] == doctest::Approx(-0.4));
  }
}

TEST_CASE("naive quantized stepper") {
  const CommMatrix m = ring_matrix(4, false);
  const CounterRng qrng(55, Stream::QuantShared);
  SUBCASE("exact quantizer reduces to full precision") {
    auto a = init_states(4, 3);
    auto b = init_states(4, 3);
    perturb(a, 0.5, 4);
    perturb(b, 0.5, 4);
    const auto grads = random_grads(4, 3, 5);
    QuantizerSpec q{QuantKind::Exact, 1.0};
    step_dpsgd_naive(a, m, 0.1, grads, q, qrng, 0);
    step_dpsgd_full(b, m, 0.1, grads);
    for (int i = 0; i < 4; ++i)
      for (int c = 0; c < 3; ++c)
        REQUIRE(a[i].x[c] == doctest::Approx(b[i].x[c]).epsilon(1e-15));
  }
  SUBCASE("on-grid consensus is a fixed point with zero gradients") {
    auto states = init_states(4, 2);
    for (auto& w : states) w.x.assign(2, 0.3);  // on the 0.1 grid
    std::vector<std::vector<double>> zeros(4, std::vector<double>(2, 0.0));
    QuantizerSpec q{QuantKind::StochasticRound, 0.1, 1.0, RandomnessPolicy::Independent};
    step_dpsgd_naive(states, m, 0.05, zeros, q, qrng, 0);
    for (const WorkerState& w : states)
      for (double v : w.x) REQUIRE(v == doctest::Approx(0.3).epsilon(1e-14));
  }
}

TEST_CASE("codec stepper matches full precision exactly with the exact kind") {
  const CommMatrix m = ring_matrix(8, false);
  QuantizerSpec q{QuantKind::Exact, 1.0};
  const ModuloCodec codec = ModuloCodec::from_quantizer(1.0, q);
  const CounterRng qrng(66, Stream::QuantShared);
  auto a = init_states(8, 4);
  auto b = init_states(8, 4);
  ConsensusGuard guard;
  for (std::uint64_t k = 0; k < 1000; ++k) {
    const auto grads = random_grads(8, 4, 100 + k);
    step_moniqua(a, m, codec, q, 0.05, grads, qrng, k, guard);
    step_dpsgd_full(b, m, 0.05, grads);
    for (int i = 0; i < 8; ++i)
      for (int c = 0; c < 4; ++c) REQUIRE(a[i].x[c] == b[i].x[c]);  // bit-identical
  }
}

TEST_CASE("codec stepper preserves the mean and the decode bound") {
  const CommMatrix m = ring_matrix(8, false);
  QuantizerSpec q = quantizer_for_delta(QuantKind::StochasticRound, 0.01);
  const ModuloCodec codec = ModuloCodec::from_quantizer(2.0, q);
  const CounterRng qrng(77, Stream::QuantShared);
  auto states = init_states(8, 6);
  ConsensusGuard guard;
  guard.mode = GuardMode::Assert;
  for (std::uint64_t k = 0; k < 300; ++k) {
    const auto grads = random_grads(8, 6, 500 + k);
    const std::vector<double> before = mean_of(states);
    step_moniqua(states, m, codec, q, 0.02, grads, qrng, k, guard);
    const std::vector<double> after = mean_of(states);
    for (std::size_t c = 0; c < 6; ++c) {
      double gbar = 0.0;
      for (int i = 0; i < 8; ++i) gbar += grads[i][c] / 8.0;
      REQUIRE(std::abs(after[c] - (before[c] - 0.02 * gbar)) <= 1e-12);
    }
  }
  CHECK(guard.log.empty());
}

TEST_CASE("two workers decode within the bound") {
  const CommMatrix m = complete_matrix(2);
  QuantizerSpec q = quantizer_for_delta(QuantKind::NearestRound, 0.05);
  const ModuloCodec codec = ModuloCodec::from_quantizer(0.5, q);
  const CounterRng qrng(88, Stream::QuantShared);
  auto states = init_states(2, 1);
  states[0].x[0] = 0.12;
  states[1].x[0] = -0.07;  // difference 0.19 < theta
  const EncodedMessage msg = encode(states[1].x, codec, q, qrng, 0, 1, false);
  const std::vector<double> hat = decode_remote(msg, states[0].x, codec);
  CHECK(std::abs(hat[0] - states[1].x[0]) <= codec.max_decode_error() + 1e-12);
}

TEST_CASE("guard aborts when the bound is violated") {
  const CommMatrix m = ring_matrix(4, false);
  QuantizerSpec q = quantizer_for_delta(QuantKind::NearestRound, 0.05);
  const ModuloCodec codec = ModuloCodec::from_quantizer(0.1, q);
  const CounterRng qrng(99, Stream::QuantShared);
  auto states = init_states(4, 2);
  states[0].x[0] = 1.0;  // far beyond theta = 0.1
  ConsensusGuard guard;
  guard.mode = GuardMode::Assert;
  const auto grads = random_grads(4, 2, 7);
  try {
    step_moniqua(states, m, codec, q, 0.05, grads, qrng, 0, guard);
    FAIL("expected a consensus violation");
  } catch (const Error& e) {
    CHECK(e.code() == Err::ConsensusViolated);
    REQUIRE(guard.log.size() == 1);
    CHECK(guard.log[0].distance >= 1.0);
  }
}

TEST_CASE("hash verification flags wrong lifts inside the stepper") {
  const CommMatrix m = ring_matrix(4, false);
  QuantizerSpec q = quantizer_for_delta(QuantKind::NearestRound, 0.05);
  const ModuloCodec codec = ModuloCodec::from_quantizer(0.1, q);
  const CounterRng qrng(111, Stream::QuantShared);
  auto states = init_states(4, 2);
  states[0].x[0] = 1.0;
  ConsensusGuard guard;
  guard.mode = GuardMode::VerifyHash;
  const auto grads = random_grads(4, 2, 8);
  try {
    step_moniqua(states, m, codec, q, 0.05, grads, qrng, 0, guard);
    FAIL("expected a verification failure");
  } catch (const Error& e) {
    CHECK(e.code() == Err::RecoveryVerificationFailed);
  }
}

TEST_CASE("variance-reduced stepper") {
  const CommMatrix m = ring_matrix(8, true);
  QuantizerSpec q{QuantKind::Exact, 1.0};
  const CounterRng qrng(121, Stream::QuantShared);
  SUBCASE("first step reduces to a plain gradient step") {
    auto states = init_states(8, 3);
    const auto grads = random_grads(8, 3, 9);
    ConsensusGuard guard;
    const ModuloCodec codec = ModuloCodec::from_quantizer(1.0, q);
    step_moniqua_d2(states, m, codec, q, 0.1, grads, qrng, 0, guard);
    // with identical x0 = 0 the exchange is a no-op on identical values
    for (int i = 0; i < 8; ++i)
      for (int c = 0; c < 3; ++c) {
        double expect = -0.1 * grads[i][c];
        double mixed = 0.0;
        for (int j = 0; j < 8; ++j) mixed += m(j, i) * -0.1 * grads[j][c];
        (void)expect;
        REQUIRE(states[i].x[c] == doctest::Approx(mixed).epsilon(1e-12));
      }
  }
  SUBCASE("mean follows the extrapolated recursion") {
    auto states = init_states(8, 4);
    ConsensusGuard guard;
    const ModuloCodec codec = ModuloCodec::from_quantizer(5.0, q);
    std::vector<double> prev_mean(4, 0.0), prev_gbar(4, 0.0);
    std::vector<double> mean(4, 0.0);
    for (std::uint64_t k = 0; k < 50; ++k) {
      const auto grads = random_grads(8, 4, 700 + k);
      std::vector<double> gbar(4, 0.0);
      for (int i = 0; i < 8; ++i)
        for (int c = 0; c < 4; ++c) gbar[c] += grads[i][c] / 8.0;
      const std::vector<double> before = mean_of(states);
      step_moniqua_d2(states, m, codec, q, 0.05, grads, qrng, k, guard);
      mean = mean_of(states);
      for (int c = 0; c < 4; ++c) {
        const double expect = k == 0
                                  ? before[c] - 0.05 * gbar[c]
                                  : 2.0 * before[c] - prev_mean[c] - 0.05 * gbar[c] +
                                        0.05 * prev_gbar[c];
        REQUIRE(std::abs(mean[c] - expect) <= 1e-12);
      }
      prev_mean = before;
      prev_gbar = gbar;
    }
  }
}

TEST_CASE("event-driven stepper") {
  SUBCASE("two workers with zero gradients contract geometrically") {
    QuantizerSpec q{QuantKind::Exact, 1.0};
    const ModuloCodec codec = ModuloCodec::from_quantizer(10.0, q);
    GossipSchedule sched = GossipSchedule::fixed_pair(2, 0, 1, 1);
    auto states = init_states(2, 1);
    states[0].x[0] = 1.0;
    states[1].x[0] = -1.0;
    ObjectiveSpec flat = ObjectiveSpec::hetero_quadratic(2, 1, 0.0, 1);
    // recenters both objectives at zero: gradient pulls to 0, alpha = 0 disables it
    const GradOracle oracle(&flat, 5);
    const CounterRng stale(5, Stream::Staleness), qrng(5, Stream::QuantShared);
    ConsensusGuard guard;
    for (std::uint64_t k = 0; k < 10; ++k)
      event_moniqua_adpsgd(states, sched, codec, q, 0.0, oracle, k, 0, stale, qrng, guard);
    CHECK(std::abs(states[0].x[0] - states[1].x[0]) <= 1.0 / 512.0);
    CHECK(states[0].x[0] + states[1].x[0] == doctest::Approx(0.0));  // mean preserved
  }
  SUBCASE("no staleness on the complete pair schedule matches a serial trace") {
    // reference oracle: serial randomized-pair SGD replay with the same draws
    const int n = 4, d = 3;
    QuantizerSpec q{QuantKind::Exact, 1.0};
    const ModuloCodec codec = ModuloCodec::from_quantizer(10.0, q);
    GossipSchedule sched = GossipSchedule::uniform_ring_pairs(n, 31, 1);
    ObjectiveSpec obj = ObjectiveSpec::hetero_quadratic(n, d, 1.0, 31);
    const GradOracle oracle(&obj, 31);
    const CounterRng stale(31, Stream::Staleness), qrng(31, Stream::QuantShared);
    auto states = init_states(n, d);
    ConsensusGuard guard;
    std::vector<std::vector<double>> mirror(n, std::vector<double>(d, 0.0));
    for (std::uint64_t k = 0; k < 200; ++k) {
      auto [i, j] = sched.pair_at(k);
      // serial replay: average the pair, then the gradient step at the
      // pre-gossip model of the active worker
      const std::vector<double> pre = mirror[i];
      for (int c = 0; c < d; ++c) {
        const double avg = 0.5 * (mirror[i][c] + mirror[j][c]);
        mirror[i][c] = avg;
        mirror[j][c] = avg;
      }
      const std::vector<double> g = oracle.sample(i, pre, k);
      for (int c = 0; c < d; ++c) mirror[i][c] -= 0.05 * g[c];

      event_moniqua_adpsgd(states, sched, codec, q, 0.05, oracle, k, 0, stale, qrng, guard);
      for (int w = 0; w < n; ++w)
        for (int c = 0; c < d; ++c)
          REQUIRE(states[w].x[c] == doctest::Approx(mirror[w][c]).epsilon(1e-14));
    }
  }
  SUBCASE("stale gradients are applied against old snapshots") {
    // worker 0 gossips every event with worker 1; with T large, the model
    // snapshots looked up must come from the recorded history
    QuantizerSpec q{QuantKind::Exact, 1.0};
    const ModuloCodec codec = ModuloCodec::from_quantizer(100.0, q);
    GossipSchedule sched = GossipSchedule::fixed_pair(2, 0, 1, 1);
    ObjectiveSpec obj = ObjectiveSpec::hetero_quadratic(2, 1, 2.0, 77);
    const GradOracle oracle(&obj, 77);
    const CounterRng stale(77, Stream::Staleness), qrng(77, Stream::QuantShared);
    auto states = init_states(2, 1);
    states[0].x[0] = 3.0;
    states[1].x[0] = -1.0;
    ConsensusGuard guard;
    for (std::uint64_t k = 0; k < 50; ++k)
      event_moniqua_adpsgd(states, sched, codec, q, 0.02, oracle, k, 4, stale, qrng, guard);
    // bounded history: at most a handful of snapshots survive pruning
    CHECK(states[0].history.size() <= 6);
    CHECK(states[1].history.size() <= 6);
  }
}

TEST_CASE("parallel kernels agree bit for bit with the serial reference") {
  const CommMatrix m = ring_matrix(8, false);
  QuantizerSpec q = quantizer_for_delta(QuantKind::StochasticRound, 0.02);
  const ModuloCodec codec = ModuloCodec::from_quantizer(2.0, q);
  const CounterRng qrng(3131, Stream::QuantShared);

  auto par = init_states(8, 33);
  auto ser = init_states(8, 33);
  ConsensusGuard gp, gs;
  for (std::uint64_t k = 0; k < 50; ++k) {
    const auto grads = random_grads(8, 33, 900 + k);
    const std::uint64_t bp = step_moniqua(par, m, codec, q, 0.03, grads, qrng, k, gp);
    const std::uint64_t bs = ref::step_moniqua(ser, m, codec, q, 0.03, grads, qrng, k, gs);
    REQUIRE(bp == bs);
    for (int i = 0; i < 8; ++i) REQUIRE(par[i].x == ser[i].x);
  }

  auto par2 = init_states(8, 17);
  auto ser2 = init_states(8, 17);
  QuantizerSpec nq{QuantKind::StochasticRound, 0.25, 1.0, RandomnessPolicy::Independent};
  for (std::uint64_t k = 0; k < 50; ++k) {
    const auto grads = random_grads(8, 17, 1900 + k);
    step_dpsgd_naive(par2, m, 0.05, grads, nq, qrng, k);
    ref::step_dpsgd_naive(ser2, m, 0.05, grads, nq, qrng, k);
    for (int i = 0; i < 8; ++i) REQUIRE(par2[i].x == ser2[i].x);
  }

  const CommMatrix lazy = ring_matrix(8, true);
  auto par3 = init_states(8, 21);
  auto ser3 = init_states(8, 21);
  QuantizerSpec dq = quantizer_for_delta(QuantKind::NearestRound, 0.002);
  const ModuloCodec c3 = ModuloCodec::from_quantizer(4.0, dq);
  for (std::uint64_t k = 0; k < 50; ++k) {
    const auto grads = random_grads(8, 21, 2900 + k);
    step_moniqua_d2(par3, lazy, c3, dq, 0.04, grads, qrng, k, gp);
    ref::step_moniqua_d2(ser3, lazy, c3, dq, 0.04, grads, qrng, k, gs);
    for (int i = 0; i < 8; ++i) REQUIRE(par3[i].x == ser3[i].x);
  }

  auto par4 = init_states(8, 12);
  auto ser4 = init_states(8, 12);
  for (std::uint64_t k = 0; k < 50; ++k) {
    const auto grads = random_grads(8, 12, 3900 + k);
    step_dpsgd_full(par4, m, 0.05, grads);
    ref::step_dpsgd_full(ser4, m, 0.05, grads);
    for (int i = 0; i < 8; ++i) REQUIRE(par4[i].x == ser4[i].x);
  }
}
