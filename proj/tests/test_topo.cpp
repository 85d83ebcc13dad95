#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "moniqua/error.hpp"
#include "moniqua/topo.hpp"

using namespace moniqua;

namespace {
constexpr double kPi = 3.14159265358979323846;

void check_doubly_stochastic(const CommMatrix& m) {
  for (int i = 0; i < m.n(); ++i) {
    double row = 0.0, col = 0.0;
    for (int j = 0; j < m.n(); ++j) {
      row += m(i, j);
      col += m(j, i);
      REQUIRE(std::abs(m(i, j) - m(j, i)) <= 1e-12);
    }
    REQUIRE(std::abs(row - 1.0) <= 1e-12);
    REQUIRE(std::abs(col - 1.0) <= 1e-12);
  }
}
}  // namespace

TEST_CASE("uniform ring spectral quantities") {
  const CommMatrix m = ring_matrix(8, false);
  check_doubly_stochastic(m);
  CHECK(m.rho() == doctest::Approx((1.0 + std::sqrt(2.0)) / 3.0).epsilon(1e-12));
  CHECK(m.rho() == doctest::Approx(0.804738).epsilon(1e-6));
  CHECK(m.lambdaN() == doctest::Approx(-1.0 / 3.0).epsilon(1e-12));
  CHECK(m.phi() == doctest::Approx(1.0 / 3.0));
  CHECK(m.neighbors(0).size() == 2);
}

TEST_CASE("lazy ring keeps the spectrum nonnegative") {
  const CommMatrix m = ring_matrix(8, true);
  check_doubly_stochastic(m);
  CHECK(m.lambda2() == doctest::Approx(0.5 + 0.5 * std::cos(kPi / 4.0)).epsilon(1e-12));
  CHECK(m.lambda2() == doctest::Approx(0.853553).epsilon(1e-6));
  CHECK(m.lambdaN() == doctest::Approx(0.0));
}

TEST_CASE("three-worker ring is the complete graph") {
  const CommMatrix m = ring_matrix(3, false);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(m(i, j) == doctest::Approx(1.0 / 3.0));
  CHECK(m.rho() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS_AS(ring_matrix(2, false), Error);
}

TEST_CASE("analytic ring eigenvalues agree with the numeric solver") {
  for (int n = 3; n <= 64; ++n) {
    for (bool lazy : {false, true}) {
      const CommMatrix m = ring_matrix(n, lazy);
      const SpectralQuantities s = spectral_quantities(m.weights(), n);
      REQUIRE(std::abs(s.lambda2 - m.lambda2()) <= 1e-10);
      REQUIRE(std::abs(s.lambdaN - m.lambdaN()) <= 1e-10);
      REQUIRE(std::abs(s.rho - m.rho()) <= 1e-10);
    }
  }
}

TEST_CASE("complete graph mixes in one round") {
  const CommMatrix m2 = complete_matrix(2);
  CHECK(m2(0, 0) == doctest::Approx(0.5));
  CHECK(m2(0, 1) == doctest::Approx(0.5));
  CHECK(m2.rho() == doctest::Approx(0.0));
  CHECK(complete_matrix(4).rho() == doctest::Approx(0.0));
  CHECK(complete_matrix(8).phi() == doctest::Approx(1.0 / 8.0));
  CHECK_THROWS_AS(complete_matrix(1), Error);

  const SpectralQuantities s = spectral_quantities(complete_matrix(5).weights(), 5);
  CHECK(s.lambda2 == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(s.lambdaN == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("identity does not mix and is rejected") {
  std::vector<double> eye(16, 0.0);
  for (int i = 0; i < 4; ++i) eye[i * 4 + i] = 1.0;
  const SpectralQuantities s = spectral_quantities(eye, 4);
  CHECK(s.rho == doctest::Approx(1.0));
  CHECK_THROWS_AS(CommMatrix::from_weights(4, eye), Error);
}

TEST_CASE("validation names the offending row or column") {
  std::vector<double> w{0.5, 0.4, 0.5, 0.5};  // asymmetric and row 0 sums to 0.9
  try {
    spectral_quantities(w, 2);
    FAIL("expected a validation error");
  } catch (const Error& e) {
    CHECK(e.code() == Err::InvalidTopology);
  }
}

TEST_CASE("slack matrix maps eigenvalues affinely") {
  const CommMatrix ring = ring_matrix(8, false);
  const CommMatrix same = slack_matrix(ring, 1.0);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) CHECK(same(i, j) == doctest::Approx(ring(i, j)));

  const CommMatrix half = slack_matrix(ring, 0.5);
  check_doubly_stochastic(half);
  CHECK(half.rho() == doctest::Approx(0.5 * ring.rho() + 0.5).epsilon(1e-12));
  CHECK(half.rho() == doctest::Approx(0.902369).epsilon(1e-6));
  CHECK(slack_matrix(complete_matrix(4), 0.25).rho() == doctest::Approx(0.75));
  CHECK_THROWS_AS(slack_matrix(ring, 0.0), Error);
  CHECK_THROWS_AS(slack_matrix(ring, 1.5), Error);

  const CounterRng rng(5, Stream::Test);
  for (int t = 0; t < 20; ++t) {
    const double gamma = 0.05 + 0.95 * rng.u01(t);
    const CommMatrix s = slack_matrix(ring, gamma);
    const SpectralQuantities numeric = spectral_quantities(s.weights(), 8);
    REQUIRE(std::abs(numeric.lambda2 - (gamma * ring.lambda2() + 1.0 - gamma)) <= 1e-10);
  }
}

TEST_CASE("pair gossip matrix averages exactly one pair") {
  const std::vector<double> w = pair_gossip_matrix(3, 0, 1);
  const std::vector<double> expect{0.5, 0.5, 0.0, 0.5, 0.5, 0.0, 0.0, 0.0, 1.0};
  for (int i = 0; i < 9; ++i) CHECK(w[i] == doctest::Approx(expect[i]));
  CHECK_THROWS_AS(pair_gossip_matrix(3, 1, 1), Error);

  // a single pair matrix does not shrink the spectral gap
  const SpectralQuantities s = spectral_quantities(pair_gossip_matrix(4, 1, 2), 4);
  CHECK(s.rho == doctest::Approx(1.0));

  // two workers: one event averages exactly
  const std::vector<double> two = pair_gossip_matrix(2, 0, 1);
  for (double v : two) CHECK(v == doctest::Approx(0.5));
}

TEST_CASE("product over the ring pairs contracts e1") {
  // explicit product of the four adjacent pair matrices on n = 4
  const int n = 4;
  std::vector<double> v{1.0, 0.0, 0.0, 0.0};
  for (int e = 0; e < n; ++e) {
    const std::vector<double> w = pair_gossip_matrix(n, e, (e + 1) % n);
    std::vector<double> next(n, 0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) next[i] += w[i * n + j] * v[j];
    v = next;
  }
  double l1 = 0.0;
  for (double x : v) l1 += std::abs(x - 0.25);
  CHECK(l1 <= 0.5);
}

TEST_CASE("mixing time bound formula") {
  CHECK(mixing_time_bound(0.0, 1) == doctest::Approx(std::log(4.0)));
  CHECK(mixing_time_bound(0.0, 1) == doctest::Approx(1.386).epsilon(1e-3));
  CHECK(mixing_time_bound(0.804738, 8) == doctest::Approx(17.75).epsilon(1e-3));
  CHECK(mixing_time_bound(0.5, 4) == doctest::Approx(5.545).epsilon(1e-3));
  CHECK(mixing_time_bound(0.5, 4, 2.0) == doctest::Approx(4.0 / 0.5).epsilon(1e-12));
  CHECK_THROWS_AS(mixing_time_bound(1.0, 4), Error);
}

TEST_CASE("window contraction of the fixed uniform ring") {
  const CommMatrix ring = ring_matrix(8, false);
  const int tmix = static_cast<int>(std::ceil(mixing_time_bound(ring.rho(), 8)));
  const int n = 8;
  std::vector<double> m(n * n, 0.0);
  for (int i = 0; i < n; ++i) m[i * n + i] = 1.0;
  auto mul = [&](const std::vector<double>& a) {
    std::vector<double> out(n * n, 0.0);
    for (int i = 0; i < n; ++i)
      for (int q = 0; q < n; ++q)
        for (int j = 0; j < n; ++j) out[i * n + j] += ring(i, q) * a[q * n + j];
    return out;
  };
  int power = 0;
  for (int ell = 1; ell <= 3; ++ell) {
    while (power < tmix * ell) {
      m = mul(m);
      ++power;
    }
    double norm1 = 0.0;
    for (int j = 0; j < n; ++j) {
      double col = 0.0;
      for (int i = 0; i < n; ++i) col += std::abs(m[i * n + j] - 1.0 / n);
      norm1 = std::max(norm1, col);
    }
    REQUIRE(norm1 <= 2.0 * std::pow(2.0, -ell));
  }
}

TEST_CASE("empirical mixing check") {
  SUBCASE("complete graph mixes in one event") {
    GossipSchedule s = GossipSchedule::fixed_matrix(complete_matrix(6), 1);
    const MixingReport rep = empirical_mixing_check(s, 32);
    CHECK(rep.pass);
    CHECK(rep.max_distance == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("uniform random pairs on the ring pass after calibration") {
    GossipSchedule s = GossipSchedule::uniform_ring_pairs(4, 99);
    const int tmix = calibrate_tmix(s, 10000);
    CHECK(tmix >= 2);
    s.tmix = tmix;
    CHECK(empirical_mixing_check(s, 10000 + tmix).pass);
    s.tmix = std::max(1, tmix / 4);
    CHECK_FALSE(empirical_mixing_check(s, 10000).pass);
  }
  SUBCASE("a starved worker never mixes") {
    GossipSchedule s = GossipSchedule::fixed_pair(3, 0, 1, 16);
    const MixingReport rep = empirical_mixing_check(s, 64);
    CHECK_FALSE(rep.pass);
    CHECK(rep.worst_basis == 2);
    CHECK(rep.max_distance == doctest::Approx(4.0 / 3.0));
  }
}

TEST_CASE("pair schedules are deterministic in the seed") {
  GossipSchedule a = GossipSchedule::uniform_ring_pairs(6, 1234);
  GossipSchedule b = GossipSchedule::uniform_ring_pairs(6, 1234);
  GossipSchedule c = GossipSchedule::uniform_ring_pairs(6, 4321);
  bool differs = false;
  for (std::uint64_t k = 0; k < 64; ++k) {
    REQUIRE(a.pair_at(k) == b.pair_at(k));
    if (a.pair_at(k) != c.pair_at(k)) differs = true;
    auto [i, j] = a.pair_at(k);
    REQUIRE(i != j);
    REQUIRE((j == (i + 1) % 6 || j == (i + 5) % 6));
  }
  CHECK(differs);
}
