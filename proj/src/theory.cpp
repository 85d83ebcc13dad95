#include "moniqua/theory.hpp"

#include <algorithm>
#include <cmath>

#include "moniqua/error.hpp"
#include "moniqua/objectives.hpp"

namespace moniqua {

namespace {
double log_b(double x, LogBase base) {
  return base == LogBase::Two ? std::log2(x) : std::log(x);
}
}  // namespace

double StepSchedule::alpha(std::uint64_t k) const {
  switch (kind) {
    case StepKind::Constant:
    case StepKind::TunedConstant:
      return alpha0;
    case StepKind::InvSqrt:
      return alpha0 / std::sqrt(static_cast<double>(k + 1));
  }
  return alpha0;
}

StepSchedule StepSchedule::tuned_constant(double varsigma, double sigma, int n,
                                          std::uint64_t K, double L) {
  if (K < 1 || n < 1) fail(Err::InvalidParameter, "tuned step needs K, n >= 1");
  StepSchedule s;
  s.kind = StepKind::TunedConstant;
  const double kd = static_cast<double>(K);
  s.alpha0 = 1.0 / (std::pow(varsigma, 2.0 / 3.0) * std::cbrt(kd) +
                    sigma * std::sqrt(kd / n) + 2.0 * L);
  s.c_alpha = 1.0;
  s.eta = 1.0;
  return s;
}

StepSchedule StepSchedule::constant(double alpha0) {
  if (!(alpha0 > 0.0)) fail(Err::InvalidParameter, "alpha0 must be positive");
  StepSchedule s;
  s.kind = StepKind::Constant;
  s.alpha0 = alpha0;
  return s;
}

StepSchedule StepSchedule::inv_sqrt(double alpha0) {
  if (!(alpha0 > 0.0)) fail(Err::InvalidParameter, "alpha0 must be positive");
  StepSchedule s;
  s.kind = StepKind::InvSqrt;
  s.alpha0 = alpha0;
  return s;
}

TheoryParams dpsgd_params(int n, double rho, const StepSchedule& schedule, double g_inf,
                          LogBase base, ThetaForm form) {
  if (!(rho >= 0.0 && rho < 1.0))
    fail(Err::InvalidParameter, "dpsgd_params requires 0 <= rho < 1");
  if (!(g_inf > 0.0)) fail(Err::InvalidParameter, "G_inf must be positive");
  if (schedule.kind == StepKind::InvSqrt)
    fail(Err::InvalidParameter,
         "the 1/sqrt(k) schedule has no finite two-constant certificate; "
         "supply theta manually");
  const double ca = schedule.c_alpha;
  const double eta = schedule.eta;
  const double l16n = log_b(16.0 * n, base);
  const double gap = 1.0 - eta * rho;
  TheoryParams p;
  p.theta_coeff = 2.0 * g_inf * ca * l16n / gap;
  if (form == ThetaForm::Appendix) p.theta_coeff *= eta;
  p.theta0 = p.theta_coeff * schedule.alpha(0);
  p.delta = gap / (8.0 * ca * ca * eta * l16n + 2.0 * gap);
  p.g_inf = g_inf;
  return p;
}

double one_bit_gamma(double rho, double delta, int n, std::uint64_t K, LogBase base) {
  if (!(rho >= 0.0 && rho < 1.0)) fail(Err::InvalidParameter, "requires 0 <= rho < 1");
  if (!(delta > 0.0 && delta < 0.5)) fail(Err::InvalidParameter, "requires 0 < delta < 1/2");
  if (K < 2) fail(Err::InvalidParameter, "requires K >= 2");
  const double t = 1.0 - 2.0 * delta;
  const double quant = 16.0 * delta * delta / (t * t);
  const double mixing =
      64.0 * log_b(4.0 * n, base) * log_b(static_cast<double>(K), base) / (1.0 - rho);
  const double gamma = 2.0 / (1.0 - rho + quant * mixing);
  return std::min(gamma, 1.0);
}

double one_bit_theta(double alpha, double g_inf, int n, double rho, double gamma,
                     LogBase base) {
  if (!(gamma > 0.0 && gamma <= 1.0)) fail(Err::InvalidParameter, "requires gamma in (0,1]");
  if (!(rho >= 0.0 && rho < 1.0)) fail(Err::InvalidParameter, "requires 0 <= rho < 1");
  return 2.0 * alpha * g_inf * log_b(16.0 * n, base) / (gamma * (1.0 - rho));
}

VarianceReductionConstants d2_constants(const CommMatrix& m) {
  const double l2 = m.lambda2();
  const double ln = m.lambdaN();
  if (!(l2 < 1.0))
    fail(Err::D2AssumptionViolated,
         "lambda2 = " + std::to_string(l2) + " violates the lambda2 < 1 assumption");
  if (!(ln > -1.0 / 3.0))
    fail(Err::D2AssumptionViolated,
         "lambdaN = " + std::to_string(ln) + " violates the lambdaN > -1/3 assumption");
  VarianceReductionConstants c;
  double vn_abs;
  if (ln <= 0.0) {
    c.v_n = ln - std::sqrt(ln * ln - ln);
    vn_abs = std::abs(c.v_n);
  } else {
    // complex root pair of z^2 - 2 lambdaN z + lambdaN; modulus sqrt(lambdaN)
    c.v_n = std::sqrt(ln);
    vn_abs = c.v_n;
  }
  const double branch_n = vn_abs + 2.0 * std::abs(ln) / (1.0 - vn_abs);
  const double branch_2 =
      l2 > 0.0 ? std::sqrt(l2 / (1.0 - l2)) + 2.0 * l2 / (1.0 - l2) : 0.0;
  c.d1 = std::max(branch_n, branch_2);
  c.d2 = std::max(2.0 / (1.0 - vn_abs), 2.0 / std::sqrt(1.0 - l2));
  return c;
}

TheoryParams d2_params(const CommMatrix& m, double alpha, double g_inf) {
  if (!(alpha > 0.0) || !(g_inf > 0.0))
    fail(Err::InvalidParameter, "d2_params needs alpha, G_inf > 0");
  VarianceReductionConstants c = d2_constants(m);
  TheoryParams p;
  p.theta_coeff = (6.0 * c.d1 * m.n() + 8.0) * g_inf;
  p.theta0 = p.theta_coeff * alpha;
  p.delta = 1.0 / (12.0 * m.n() * c.d2 + 2.0);
  p.g_inf = g_inf;
  return p;
}

TheoryParams adpsgd_params(int tmix, double alpha, double g_inf) {
  if (tmix < 1) fail(Err::InvalidParameter, "tmix must be >= 1");
  if (!(alpha > 0.0) || !(g_inf > 0.0))
    fail(Err::InvalidParameter, "adpsgd_params needs alpha, G_inf > 0");
  TheoryParams p;
  p.theta_coeff = 16.0 * tmix * g_inf;
  p.theta0 = p.theta_coeff * alpha;
  p.delta = 1.0 / (64.0 * tmix + 2.0);
  p.g_inf = g_inf;
  return p;
}

double naive_divergence_floor(double phi, double delta_q) {
  if (!(phi > 0.0 && phi <= 1.0)) fail(Err::InvalidParameter, "phi must be in (0,1]");
  if (delta_q < 0.0) fail(Err::InvalidParameter, "delta_q must be nonnegative");
  return phi * phi * delta_q * delta_q / (8.0 * (1.0 + phi * phi));
}

int bits_budget_bound(int n, double rho) {
  if (!(rho >= 0.0 && rho < 1.0)) fail(Err::InvalidParameter, "requires 0 <= rho < 1");
  return static_cast<int>(
      std::ceil(std::log2(4.0 * std::log2(16.0 * n) / (1.0 - rho) + 3.0)));
}

double estimate_g_inf(const GradOracle& oracle, const CommMatrix& m,
                      const StepSchedule& schedule, int warmup_iters, double safety) {
  if (warmup_iters < 1) fail(Err::InvalidParameter, "warmup needs at least one iteration");
  const int n = m.n();
  const int d = oracle.objective().dim();
  std::vector<std::vector<double>> x(n, std::vector<double>(d, 0.0));
  std::vector<std::vector<double>> g(n);
  double max_inf = 0.0;
  for (int k = 0; k < warmup_iters; ++k) {
    for (int i = 0; i < n; ++i) {
      g[i] = oracle.sample(i, x[i], static_cast<std::uint64_t>(k));
      for (double v : g[i]) max_inf = std::max(max_inf, std::abs(v));
    }
    const double a = schedule.alpha(static_cast<std::uint64_t>(k));
    std::vector<std::vector<double>> next(n, std::vector<double>(d));
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < d; ++j) {
        double acc = x[i][j];
        for (int q : m.neighbors(i)) acc += (x[q][j] - x[i][j]) * m(q, i);
        next[i][j] = acc - a * g[i][j];
      }
    }
    x.swap(next);
  }
  return safety * max_inf;
}

}  // namespace moniqua
