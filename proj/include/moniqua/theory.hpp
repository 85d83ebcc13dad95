#pragma once

#include <cstdint>
#include <string>

#include "moniqua/topo.hpp"

namespace moniqua {

class GradOracle;

enum class LogBase { E, Two };
// The published bound-schedule derivation appears in two forms differing by a
// factor eta on theta; the default keeps the larger (safer) window.
enum class ThetaForm { Main, Appendix };

enum class StepKind { Constant, InvSqrt, TunedConstant };

// Step-size schedule with the certificate constants (C_alpha, eta) of the
// two-constant condition alpha_k / alpha_{k+t} <= C_alpha * eta^t.
struct StepSchedule {
  StepKind kind = StepKind::Constant;
  double alpha0 = 0.1;
  double c_alpha = 1.0;
  double eta = 1.0;

  double alpha(std::uint64_t k) const;
  // alpha = 1/(varsigma^{2/3} K^{1/3} + sigma sqrt(K/n) + 2L), constant in k,
  // so C_alpha = eta = 1 exactly.
  static StepSchedule tuned_constant(double varsigma, double sigma, int n, std::uint64_t K,
                                     double L);
  static StepSchedule constant(double alpha0);
  static StepSchedule inv_sqrt(double alpha0);
};

enum class ParamProvenance { Prescribed, WarmupEstimated, Manual };

struct TheoryParams {
  // theta_k = theta_coeff * alpha_k; theta0 is the k = 0 value.
  double theta_coeff = 0.0;
  double theta0 = 0.0;
  double delta = 0.0;
  double gamma = 1.0;  // slack ratio; 1 outside the 1-bit mode
  double g_inf = 0.0;
  ParamProvenance provenance = ParamProvenance::Prescribed;
};

// theta_k = 2 alpha_k G_inf C_alpha log(16n) / (1 - eta rho),
// delta   = (1 - eta rho) / (8 C_alpha^2 eta log(16n) + 2(1 - eta rho)).
TheoryParams dpsgd_params(int n, double rho, const StepSchedule& schedule, double g_inf,
                          LogBase base = LogBase::E, ThetaForm form = ThetaForm::Main);

// gamma = 2 / (1 - rho + (16 delta^2/(1-2 delta)^2) * 64 log(4n) log(K)/(1-rho)),
// clamped to (0, 1].
double one_bit_gamma(double rho, double delta, int n, std::uint64_t K,
                     LogBase base = LogBase::E);

// theta = 2 alpha G_inf log(16n) / (gamma (1 - rho)) for the slack-matrix mode.
double one_bit_theta(double alpha, double g_inf, int n, double rho, double gamma,
                     LogBase base = LogBase::E);

struct VarianceReductionConstants {
  double v_n;
  double d1;
  double d2;
};

// v_n = lambdaN - sqrt(lambdaN^2 - lambdaN) (|v_n| = sqrt(lambdaN) when
// lambdaN > 0, the modulus of the complex root pair);
// D1 = max{|v_n| + 2|lambdaN|/(1-|v_n|), sqrt(lambda2/(1-lambda2)) + 2 lambda2/(1-lambda2)};
// D2 = max{2/(1-|v_n|), 2/sqrt(1-lambda2)}.
// Requires lambda2 < 1 and lambdaN > -1/3.
VarianceReductionConstants d2_constants(const CommMatrix& m);

// theta = (6 D1 n + 8) alpha G_inf, delta = 1/(12 n D2 + 2).
TheoryParams d2_params(const CommMatrix& m, double alpha, double g_inf);

// theta = 16 tmix alpha G_inf, delta = 1/(64 tmix + 2).
TheoryParams adpsgd_params(int tmix, double alpha, double g_inf);

// phi^2 delta_q^2 / (8 (1 + phi^2)): the gradient-norm floor that naive
// quantization cannot descend below with an unbiased linear quantizer of grid
// spacing delta_q.
double naive_divergence_floor(double phi, double delta_q);

// ceil(log2(4 log2(16n)/(1-rho) + 3)): the per-parameter bit budget printed
// for the nearest-rounding codec, with base-2 logs throughout.
int bits_budget_bound(int n, double rho);

// Runs `warmup_iters` of full-precision decentralized SGD from the shared
// start and returns safety * max ||sampled gradient||_inf observed.
// Deterministic given the oracle's seed.
double estimate_g_inf(const GradOracle& oracle, const CommMatrix& m,
                      const StepSchedule& schedule, int warmup_iters, double safety);

}  // namespace moniqua
