#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "moniqua/error.hpp"
#include "moniqua/objectives.hpp"

using namespace moniqua;

namespace {

// Central finite differences of the local objective value. The per-worker
// value is reconstructed from the global one for the quadratic kinds; for the
// data-driven kinds we difference f itself against the mean gradient.
std::vector<double> fd_grad(const ObjectiveSpec& obj, const std::vector<double>& x) {
  const double h = 1e-6;
  std::vector<double> g(x.size());
  std::vector<double> p = x;
  for (std::size_t c = 0; c < x.size(); ++c) {
    const double keep = p[c];
    p[c] = keep + h;
    const double up = obj.value(p);
    p[c] = keep - h;
    const double dn = obj.value(p);
    p[c] = keep;
    g[c] = (up - dn) / (2.0 * h);
  }
  return g;
}

void check_grad_matches_fd(const ObjectiveSpec& obj, std::uint64_t tag) {
  const CounterRng rng(tag, Stream::Test);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> x(obj.dim());
    for (int c = 0; c < obj.dim(); ++c) x[c] = 2.0 * rng.sym(t, c);
    const std::vector<double> g = obj.grad(x);
    const std::vector<double> fd = fd_grad(obj, x);
    for (int c = 0; c < obj.dim(); ++c) {
      const double scale = std::max(1.0, std::abs(g[c]));
      REQUIRE(std::abs(g[c] - fd[c]) <= 1e-6 * scale);
    }
  }
}

}  // namespace

TEST_CASE("off-grid quadratic") {
  const ObjectiveSpec obj = ObjectiveSpec::theorem1_quadratic(3, 0.1);
  const std::vector<double> opt = obj.optimum_oracle();
  for (double v : opt) CHECK(v == doctest::Approx(0.05));
  const std::vector<double> g0 = obj.grad(std::vector<double>(3, 0.0));
  for (double v : g0) CHECK(v == doctest::Approx(-0.05));
  const std::vector<double> gopt = obj.grad(opt);
  for (double v : gopt) CHECK(v == doctest::Approx(0.0));
  CHECK(obj.lipschitz() == doctest::Approx(1.0));
  check_grad_matches_fd(obj, 1);
}

TEST_CASE("heterogeneous quadratics control the outer variance") {
  SUBCASE("zero spread means identical workers") {
    const ObjectiveSpec obj = ObjectiveSpec::hetero_quadratic(6, 4, 0.0, 3);
    CHECK(obj.outer_variance(std::vector<double>(4, 0.3)) == doctest::Approx(0.0));
  }
  SUBCASE("spread sets the variance exactly") {
    const ObjectiveSpec obj = ObjectiveSpec::hetero_quadratic(8, 5, 1.5, 3);
    const double v = obj.outer_variance(std::vector<double>(5, 0.0));
    CHECK(v == doctest::Approx(1.5 * 1.5).epsilon(1e-10));
    // x-independent for these quadratics
    const double v2 = obj.outer_variance(std::vector<double>(5, 2.0));
    CHECK(v2 == doctest::Approx(v).epsilon(1e-10));
    check_grad_matches_fd(obj, 2);
  }
  SUBCASE("two workers with opposite centers") {
    const ObjectiveSpec obj = ObjectiveSpec::hetero_quadratic(2, 3, 0.7, 5);
    const std::vector<double> opt = obj.optimum_oracle();
    const std::vector<double> g1 = obj.grad_i(0, opt);
    const std::vector<double> g2 = obj.grad_i(1, opt);
    for (int c = 0; c < 3; ++c) CHECK(g1[c] == doctest::Approx(-g2[c]).epsilon(1e-9));
    CHECK(obj.outer_variance(opt) == doctest::Approx(0.49).epsilon(1e-9));
  }
}

TEST_CASE("least squares shards") {
  const ObjectiveSpec obj = ObjectiveSpec::least_squares(4, 6, 20, 0.0, 11);
  check_grad_matches_fd(obj, 3);

  SUBCASE("normal-equations optimum agrees with a gradient-descent limit") {
    std::vector<double> x(6, 0.0);
    for (int it = 0; it < 60000; ++it) {
      const std::vector<double> g = obj.grad(x);
      for (int c = 0; c < 6; ++c) x[c] -= 0.8 * g[c];
    }
    const std::vector<double> opt = obj.optimum_oracle();
    for (int c = 0; c < 6; ++c) REQUIRE(std::abs(x[c] - opt[c]) <= 1e-8);
  }
  SUBCASE("sampling requirements") {
    CHECK_THROWS_AS(ObjectiveSpec::least_squares(4, 6, 5, 0.0, 11), Error);
  }
  SUBCASE("shared design equalizes the local Hessians") {
    const ObjectiveSpec sh = ObjectiveSpec::least_squares(4, 5, 15, 0.0, 11, true);
    const std::vector<double> x(5, 0.25);
    // equal Hessians: grad_i differences are x-independent
    std::vector<double> d0 = sh.grad_i(0, x);
    std::vector<double> d1 = sh.grad_i(1, x);
    const std::vector<double> y(5, -1.0);
    std::vector<double> e0 = sh.grad_i(0, y);
    std::vector<double> e1 = sh.grad_i(1, y);
    for (int c = 0; c < 5; ++c)
      CHECK(d0[c] - d1[c] == doctest::Approx(e0[c] - e1[c]).epsilon(1e-9));
  }
}

TEST_CASE("logistic shards") {
  const ObjectiveSpec obj = ObjectiveSpec::logistic(3, 4, 30, 0.1, 13);
  check_grad_matches_fd(obj, 4);
  const std::vector<double> opt = obj.optimum_oracle();
  const std::vector<double> g = obj.grad(opt);
  for (double v : g) CHECK(std::abs(v) <= 1e-10);
}

TEST_CASE("bounded-noise gradient oracle") {
  ObjectiveSpec obj = ObjectiveSpec::least_squares(4, 5, 15, 0.2, 17);
  const GradOracle oracle(&obj, 17);
  const std::vector<double> x(5, 0.1);

  SUBCASE("noise off reproduces the analytic gradient") {
    ObjectiveSpec quiet = ObjectiveSpec::least_squares(4, 5, 15, 0.0, 17);
    const GradOracle qo(&quiet, 17);
    const std::vector<double> g = qo.sample(2, x, 9);
    const std::vector<double> exact = quiet.grad_i(2, x);
    for (int c = 0; c < 5; ++c) CHECK(g[c] == exact[c]);
  }
  SUBCASE("same keys give identical draws, different keys differ") {
    const std::vector<double> a = oracle.sample(1, x, 5);
    const std::vector<double> b = oracle.sample(1, x, 5);
    CHECK(a == b);
    CHECK(oracle.sample(1, x, 6) != a);
    CHECK(oracle.sample(2, x, 5) != a);
  }
  SUBCASE("support is bounded by the analytic gradient plus the half-width") {
    const std::vector<double> exact = obj.grad_i(0, x);
    for (std::uint64_t k = 0; k < 3000; ++k) {
      const std::vector<double> g = oracle.sample(0, x, k);
      for (int c = 0; c < 5; ++c) REQUIRE(std::abs(g[c] - exact[c]) <= 0.2 + 1e-15);
    }
  }
  SUBCASE("sample mean approaches the analytic gradient") {
    const std::vector<double> exact = obj.grad_i(0, x);
    const std::uint64_t draws = 100000;
    std::vector<double> mean(5, 0.0);
    for (std::uint64_t k = 0; k < draws; ++k) {
      const std::vector<double> g = oracle.sample(0, x, k);
      for (int c = 0; c < 5; ++c) mean[c] += g[c] / draws;
    }
    // uniform noise se = b/sqrt(3 N)
    const double se = 0.2 / std::sqrt(3.0 * draws);
    for (int c = 0; c < 5; ++c) REQUIRE(std::abs(mean[c] - exact[c]) <= 4.0 * se);
  }
  SUBCASE("empirical noise variance matches d b^2 / 3") {
    const std::vector<double> exact = obj.grad_i(0, x);
    const std::uint64_t draws = 10000;
    double acc = 0.0;
    for (std::uint64_t k = 0; k < draws; ++k) {
      const std::vector<double> g = oracle.sample(0, x, k);
      double s = 0.0;
      for (int c = 0; c < 5; ++c) s += (g[c] - exact[c]) * (g[c] - exact[c]);
      acc += s;
    }
    const double sigma2 = acc / draws;
    CHECK(sigma2 == doctest::Approx(obj.noise_variance()).epsilon(0.1));
  }
  SUBCASE("diverged states are reported") {
    std::vector<double> bad(5, std::numeric_limits<double>::quiet_NaN());
    CHECK_THROWS_AS(oracle.sample(0, bad, 0), Error);
  }
}
