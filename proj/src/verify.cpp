#include "moniqua/verify.hpp"

#include <cmath>
#include <cstdio>
#include <set>

#include "moniqua/algos.hpp"
#include "moniqua/codec.hpp"
#include "moniqua/config.hpp"
#include "moniqua/error.hpp"
#include "moniqua/harness.hpp"
#include "moniqua/theory.hpp"

namespace moniqua {

namespace {

constexpr std::uint64_t kVerifySeed = 0x7665726966790001ULL;

SuiteResult recovery_suite() {
  SuiteResult r{"recovery", false, 0.0, ""};
  const CounterRng rng(kVerifySeed, Stream::Test);
  const std::uint64_t trials = 1000000;
  double worst = 0.0;
  for (std::uint64_t t = 0; t < trials; ++t) {
    const double theta = std::pow(10.0, -3.0 + 6.0 * rng.u01(t, 0));
    const double y = 100.0 * rng.sym(t, 1);
    const double x = y + 0.999 * theta * rng.sym(t, 2);
    const double rec = exact_recover(centered_mod(x, 2.0 * theta), y, theta);
    worst = std::max(worst, std::abs(rec - x) / std::max(1.0, std::abs(x)));
  }
  r.margin = worst;
  r.pass = worst <= 1e-12;
  char buf[128];
  std::snprintf(buf, sizeof buf, "max relative recovery error %.3e over %llu trials", worst,
                static_cast<unsigned long long>(trials));
  r.detail = buf;
  return r;
}

SuiteResult codec_bound_suite(FaultInjection fault) {
  SuiteResult r{"codec_bound", false, 0.0, ""};
  const CounterRng rng(kVerifySeed + 1, Stream::Test);
  const std::uint64_t trials_per_kind = 1000000;
  double worst_ratio = 0.0;
  std::uint64_t exceptions = 0;
  const double bound_scale = fault == FaultInjection::CodecBoundHalved ? 0.5 : 1.0;
  for (QuantKind kind : {QuantKind::StochasticRound, QuantKind::NearestRound}) {
    const std::uint64_t tag = kind == QuantKind::StochasticRound ? 0 : 1;
    for (std::uint64_t t = 0; t < trials_per_kind; ++t) {
      const double delta_target = 0.002 + 0.44 * rng.u01(t, tag, 0);
      QuantizerSpec q = quantizer_for_delta(kind, delta_target);
      const double theta = std::pow(10.0, -2.0 + 4.0 * rng.u01(t, tag, 1));
      const ModuloCodec codec = ModuloCodec::from_quantizer(theta, q);
      const double y = 50.0 * rng.sym(t, tag, 2);
      const double x = y + 0.999 * theta * rng.sym(t, tag, 3);
      const std::vector<double> xv{x};
      const EncodedMessage msg = encode(xv, codec, q, rng, t, 0, false);
      const std::vector<double> hat = decode_remote(msg, std::vector<double>{y}, codec);
      const double err = std::abs(hat[0] - x);
      const double bound = bound_scale * codec.max_decode_error() + 1e-12;
      worst_ratio = std::max(worst_ratio, err / bound);
      if (err > bound) ++exceptions;
    }
  }
  r.margin = worst_ratio;
  r.pass = exceptions == 0;
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "%llu bound exceptions over 2x%llu trials, worst error/bound ratio %.4f",
                static_cast<unsigned long long>(exceptions),
                static_cast<unsigned long long>(trials_per_kind), worst_ratio);
  r.detail = buf;
  return r;
}

SuiteResult quantizer_suite() {
  SuiteResult r{"quantizer", false, 0.0, ""};
  const CounterRng rng(kVerifySeed + 2, Stream::Test);
  double worst = 0.0;  // |Q(x)-x| / (delta + 1e-15)
  const std::uint64_t trials = 1000000;
  for (std::uint64_t t = 0; t < trials; ++t) {
    const double x = rng.u01(t, 0) - 0.5;
    const int m = 1 + static_cast<int>(rng.pick(64, t, 1));
    const double step = 1.0 / m;
    const double u = rng.u01(t, 2);
    const double es = std::abs(stochastic_round(x, step, u) - x) / (step + 1e-15);
    const double en = std::abs(nearest_round(x, step) - x) / (step / 2.0 + 1e-15);
    worst = std::max(worst, std::max(es, en));
  }
  bool unbiased_ok = true;
  double worst_bias = 0.0;
  for (int p = 0; p < 100; ++p) {
    const double x = rng.u01(1000 + p, 0) - 0.5;
    const double step = 1.0;
    const std::uint64_t draws = 100000;
    double sum = 0.0, sumsq = 0.0;
    for (std::uint64_t t = 0; t < draws; ++t) {
      const double qv = stochastic_round(x, step, rng.u01(2000 + p, t));
      sum += qv;
      sumsq += qv * qv;
    }
    const double mean = sum / draws;
    const double var = std::max(sumsq / draws - mean * mean, 1e-30);
    const double se = std::sqrt(var / draws);
    const double dev = std::abs(mean - x) / (4.0 * se);
    worst_bias = std::max(worst_bias, dev);
    if (dev > 1.0) unbiased_ok = false;
  }
  r.margin = std::max(worst, worst_bias);
  r.pass = worst <= 1.0 && unbiased_ok;
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "worst |Q(x)-x|/delta %.6f; worst bias deviation %.3f of 4 standard errors",
                worst, worst_bias);
  r.detail = buf;
  return r;
}

SuiteResult mixing_suite() {
  SuiteResult r{"mixing", false, 0.0, ""};
  // fixed-matrix window contraction on the uniform ring
  const CommMatrix ring = ring_matrix(8, false);
  const int n = ring.n();
  const int tmix = static_cast<int>(std::ceil(mixing_time_bound(ring.rho(), n)));
  double worst = 0.0;
  std::vector<double> m(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) m[static_cast<std::size_t>(i) * n + i] = 1.0;
  auto mul = [&](const std::vector<double>& a) {
    std::vector<double> out(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
      for (int q = 0; q < n; ++q) {
        const double w = ring(i, q);
        if (w == 0.0) continue;
        for (int j = 0; j < n; ++j)
          out[static_cast<std::size_t>(i) * n + j] += w * a[static_cast<std::size_t>(q) * n + j];
      }
    return out;
  };
  int power = 0;
  for (int ell = 1; ell <= 3; ++ell) {
    while (power < tmix * ell) {
      m = mul(m);
      ++power;
    }
    double norm1 = 0.0;  // induced l1 norm of W^t (I - 11^T/n): max column abs sum
    for (int j = 0; j < n; ++j) {
      double col = 0.0;
      for (int i = 0; i < n; ++i)
        col += std::abs(m[static_cast<std::size_t>(i) * n + j] - 1.0 / n);
      norm1 = std::max(norm1, col);
    }
    const double bound = 2.0 * std::pow(2.0, -ell);
    worst = std::max(worst, norm1 / bound);
  }

  // calibrated pair schedule passes its own window check
  const GossipSchedule sched = GossipSchedule::uniform_ring_pairs(4, kVerifySeed);
  const int cal = calibrate_tmix(sched, 10000);
  GossipSchedule tuned = sched;
  tuned.tmix = cal;
  const MixingReport rep = empirical_mixing_check(tuned, 10000 + cal);

  // a schedule that starves one worker must fail
  GossipSchedule stuck = GossipSchedule::fixed_pair(3, 0, 1, 8);
  const MixingReport stuck_rep = empirical_mixing_check(stuck, 64);

  r.margin = std::max(worst, rep.max_distance / 0.5);
  r.pass = worst <= 1.0 && rep.pass && !stuck_rep.pass;
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "window contraction worst ratio %.4f; calibrated tmix=%d max distance %.4f; "
                "starved schedule distance %.3f (expected fail)",
                worst, cal, rep.max_distance, stuck_rep.max_distance);
  r.detail = buf;
  return r;
}

SuiteResult mean_preservation_suite() {
  SuiteResult r{"mean_preservation", false, 0.0, ""};
  const char* configs[] = {
      "algorithm = dpsgd\n"
      "topology = ring\nn = 8\niters = 120\nseed = 7\nmean_check = true\n"
      "objective.kind = least_squares\nobjective.dim = 10\nobjective.samples = 20\n"
      "objective.noise_b = 0.05\nstep.alpha0 = 0.05\n",
      "algorithm = moniqua\n"
      "topology = ring\nn = 8\niters = 120\nseed = 7\nmean_check = true\n"
      "objective.kind = least_squares\nobjective.dim = 10\nobjective.samples = 20\n"
      "objective.noise_b = 0.05\nstep.alpha0 = 0.05\nquantizer.kind = nearest_round\n",
      "algorithm = moniqua_d2\n"
      "topology = ring_lazy\nn = 8\niters = 120\nseed = 7\nmean_check = true\n"
      "objective.kind = hetero_quadratic\nobjective.dim = 6\nobjective.spread = 1.5\n"
      "step.alpha0 = 0.05\nquantizer.kind = nearest_round\n",
  };
  try {
    for (const char* text : configs) {
      ExperimentConfig cfg = parse_config_text(text, "<verify>");
      run_experiment(cfg);
    }
    r.pass = true;
    r.detail = "mean drift <= 1e-12 per step across dpsgd, moniqua, moniqua_d2 runs";
  } catch (const std::exception& e) {
    r.pass = false;
    r.detail = e.what();
  }
  return r;
}

SuiteResult shared_randomness_suite() {
  SuiteResult r{"shared_randomness", false, 0.0, ""};
  const CounterRng rng(kVerifySeed + 3, Stream::Test);
  const std::uint64_t draws = 100000;
  double worst_dev = 0.0;
  for (int p = 0; p < 50; ++p) {
    const double x = 6.0 * rng.u01(p, 0) - 3.0;
    const double y = 6.0 * rng.u01(p, 1) - 3.0;
    double xf = x - std::floor(x);
    double yf = y - std::floor(y);
    if (xf > yf) std::swap(xf, yf);
    const double expected = (1.0 - yf + xf) * (yf - xf);
    double sum = 0.0, sumsq = 0.0;
    for (std::uint64_t t = 0; t < draws; ++t) {
      const double u = rng.u01(100 + p, t);
      const double dx = stochastic_round(x, 1.0, u) - x;
      const double dy = stochastic_round(y, 1.0, u) - y;
      const double
          v = (dx - dy) * (dx - dy);
      sum += v;
      sumsq += v * v;
    }
    const double mean = sum / draws;
    const double var = std::max(sumsq / draws - mean * mean, 1e-30);
    const double se = std::sqrt(var / draws);
    const double dev = std::abs(mean - expected) / (5.0 * std::max(se, 1e-12));
    worst_dev = std::max(worst_dev, dev);
  }

  // vector bound with unit step: E||r||^2 <= sqrt(d) * E||x - y||
  const int d = 16;
  bool vector_ok = true;
  double worst_vec = 0.0;
  for (int p = 0; p < 20; ++p) {
    std::vector<double> x(d), y(d);
    double dist = 0.0;
    for (int c = 0; c < d; ++c) {
      x[c] = 4.0 * rng.u01(500 + p, c) - 2.0;
      y[c] = x[c] + rng.sym(600 + p, c);
      dist += (x[c] - y[c]) * (x[c] - y[c]);
    }
    dist = std::sqrt(dist);
    double acc = 0.0;
    const std::uint64_t vdraws = 20000;
    for (std::uint64_t t = 0; t < vdraws; ++t) {
      double s = 0.0;
      for (int c = 0; c < d; ++c) {
        const double u = rng.u01(700 + p, t, c);
        const double dx = stochastic_round(x[c], 1.0, u) - x[c];
        const double dy = stochastic_round(y[c], 1.0, u) - y[c];
        s += (dx - dy) * (dx - dy);
      }
      acc += s;
    }
    const double lhs = acc / vdraws;
    const double rhs = std::sqrt(static_cast<double>(d)) * dist;
    worst_vec = std::max(worst_vec, lhs / rhs);
    if (lhs > rhs) vector_ok = false;
  }
  r.margin = std::max(worst_dev, worst_vec);
  r.pass = worst_dev <= 1.0 && vector_ok;
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "worst identity deviation %.3f of 5 standard errors; worst vector-bound "
                "ratio %.4f",
                worst_dev, worst_vec);
  r.detail = buf;
  return r;
}

}  // namespace

std::vector<SuiteResult> verify_suite(const std::string& selector, FaultInjection fault) {
  static const std::set<std::string> known = {"all",    "recovery",          "codec_bound",
                                              "quantizer", "mixing",         "mean_preservation",
                                              "shared_randomness"};
  if (!known.count(selector))
    fail(Err::InvalidParameter, "unknown verify suite '" + selector + "'");
  std::vector<SuiteResult> out;
  const bool all = selector == "all";
  if (all || selector == "recovery") out.push_back(recovery_suite());
  if (all || selector == "codec_bound") out.push_back(codec_bound_suite(fault));
  if (all || selector == "quantizer") out.push_back(quantizer_suite());
  if (all || selector == "mixing") out.push_back(mixing_suite());
  if (all || selector == "mean_preservation") out.push_back(mean_preservation_suite());
  if (all || selector == "shared_randomness") out.push_back(shared_randomness_suite());
  return out;
}

bool all_pass(const std::vector<SuiteResult>& results) {
  for (const SuiteResult& r : results)
    if (!r.pass) return false;
  return true;
}

}  // namespace moniqua
