#include "moniqua/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "moniqua/codec.hpp"
#include "moniqua/error.hpp"

namespace moniqua {

ObjectiveSpec build_objective(const ExperimentConfig& cfg) {
  switch (cfg.objective_kind) {
    case ObjectiveKind::Theorem1Quadratic: {
      // the quantizer grid spacing doubles as the objective's off-grid shift
      const double dq = cfg.quantizer_step_set ? cfg.quantizer.step : 0.1;
      return ObjectiveSpec::theorem1_quadratic(cfg.objective_dim, dq);
    }
    case ObjectiveKind::HeteroQuadratic:
      return ObjectiveSpec::hetero_quadratic(cfg.n, cfg.objective_dim, cfg.objective_spread,
                                             cfg.seed);
    case ObjectiveKind::LeastSquares: {
      ObjectiveSpec o =
          ObjectiveSpec::least_squares(cfg.n, cfg.objective_dim, cfg.objective_samples,
                                       cfg.objective_noise_b, cfg.seed,
                                       cfg.objective_shared_design);
      return o;
    }
    case ObjectiveKind::Logistic: {
      ObjectiveSpec o = ObjectiveSpec::logistic(cfg.n, cfg.objective_dim,
                                                cfg.objective_samples, cfg.objective_l2_reg,
                                                cfg.seed);
      o.set_noise_b(cfg.objective_noise_b);
      return o;
    }
  }
  fail(Err::ConfigValidation, "unhandled objective kind");
}

namespace {

StepSchedule build_schedule(const ExperimentConfig& cfg, const ObjectiveSpec& obj) {
  switch (cfg.step_kind) {
    case StepKind::Constant: {
      StepSchedule s = StepSchedule::constant(cfg.step_alpha0);
      s.c_alpha = cfg.step_c_alpha;
      s.eta = cfg.step_eta;
      return s;
    }
    case StepKind::InvSqrt:
      return StepSchedule::inv_sqrt(cfg.step_alpha0);
    case StepKind::TunedConstant: {
      const std::vector<double> opt = obj.optimum_oracle();
      const double varsigma = std::sqrt(obj.outer_variance(opt));
      const double sigma = std::sqrt(obj.noise_variance());
      return StepSchedule::tuned_constant(varsigma, sigma, cfg.n,
                                          std::max<std::uint64_t>(cfg.iters, 1),
                                          obj.lipschitz());
    }
  }
  fail(Err::ConfigValidation, "unhandled step kind");
}

std::vector<std::vector<double>> sample_all_gradients(const GradOracle& oracle, int n,
                                                      const std::vector<WorkerState>& states,
                                                      std::uint64_t k) {
  std::vector<std::vector<double>> grads(n);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) grads[i] = oracle.sample(i, states[i].x, k);
  return grads;
}

std::vector<double> mean_model(const std::vector<WorkerState>& states) {
  const std::size_t d = states[0].x.size();
  std::vector<double> mean(d, 0.0);
  for (const WorkerState& w : states)
    for (std::size_t c = 0; c < d; ++c) mean[c] += w.x[c];
  for (double& v : mean) v /= static_cast<double>(states.size());
  return mean;
}

MetricsRecord make_record(std::uint64_t k, const std::vector<WorkerState>& states,
                          const ObjectiveSpec& obj, double theta_k, std::uint64_t bits_cum,
                          std::uint64_t violations) {
  MetricsRecord r;
  r.k = k;
  const std::vector<double> mean = mean_model(states);
  r.loss = obj.value(mean);
  const std::vector<double> g = obj.grad(mean);
  for (double v : g) r.grad_norm_sq += v * v;
  r.consensus_inf = max_pairwise_inf_distance(states);
  for (const WorkerState& w : states) {
    double s = 0.0;
    for (std::size_t c = 0; c < mean.size(); ++c)
      s += (mean[c] - w.x[c]) * (mean[c] - w.x[c]);
    r.consensus_l2 += s;
  }
  r.consensus_l2 /= static_cast<double>(states.size());
  r.theta_k = theta_k;
  r.bits_cum = bits_cum;
  r.violations = violations;
  return r;
}

void check_mean_step(const std::vector<double>& before, const std::vector<double>& after,
                     const std::vector<double>& expected_shift, std::uint64_t k) {
  double worst = 0.0;
  for (std::size_t c = 0; c < before.size(); ++c)
    worst = std::max(worst, std::abs(after[c] - (before[c] - expected_shift[c])));
  if (worst > 1e-12)
    fail(Err::Runtime, "mean-preservation violated at iteration " + std::to_string(k) +
                           ": drift " + std::to_string(worst));
}

}  // namespace

ResolvedParams resolve_params(const ExperimentConfig& cfg, const CommMatrix& base,
                              const ObjectiveSpec& objective) {
  ResolvedParams p;
  p.rho = base.rho();
  p.lambda2 = base.lambda2();
  p.lambdaN = base.lambdaN();
  p.phi = base.phi();
  p.bits_budget = bits_budget_bound(cfg.n, base.rho());

  const StepSchedule schedule = build_schedule(cfg, objective);
  p.alpha0 = schedule.alpha(0);

  GradOracle oracle(&objective, cfg.seed);
  auto need_g_inf = [&]() {
    if (p.g_inf > 0.0) return;
    if (cfg.theory_g_inf) {
      if (!(*cfg.theory_g_inf > 0.0))
        fail(Err::ConfigValidation, "key theory.g_inf: must be positive");
      p.g_inf = *cfg.theory_g_inf;
      p.g_inf_provenance = ParamProvenance::Manual;
    } else {
      p.g_inf = estimate_g_inf(oracle, base, schedule, cfg.theory_warmup_iters,
                               cfg.theory_safety);
      p.g_inf_provenance = ParamProvenance::WarmupEstimated;
      if (!(p.g_inf > 0.0))
        fail(Err::ConfigValidation,
             "warmup observed a zero gradient bound; supply theory.g_inf manually");
    }
  };

  if (cfg.algorithm == Algorithm::MoniquaAdpsgd) {
    if (cfg.adpsgd_tmix) {
      if (*cfg.adpsgd_tmix < 1) fail(Err::ConfigValidation, "key adpsgd.tmix: need >= 1");
      p.tmix = *cfg.adpsgd_tmix;
    } else {
      p.tmix = calibrate_tmix(GossipSchedule::uniform_ring_pairs(cfg.n, cfg.seed));
    }
  }

  if (!cfg.uses_codec()) {
    p.quantizer = cfg.quantizer;
    p.delta = cfg.quantizer.kind == QuantKind::Exact ? 0.0 : cfg.quantizer.delta();
    p.bits_per_coord = 64;
    return p;
  }

  // quantizer grid: explicit step > manual delta override > theorem delta
  if (cfg.quantizer.kind == QuantKind::Exact) {
    p.quantizer = cfg.quantizer;
    p.delta = 0.0;
  } else if (cfg.quantizer_step_set) {
    p.quantizer = cfg.quantizer;
    p.delta = p.quantizer.delta();
    if (!(p.delta < 0.5))
      fail(Err::ConfigValidation, "quantizer.step yields delta >= 1/2, outside the codec domain");
  } else if (cfg.theory_delta) {
    p.quantizer = quantizer_for_delta(cfg.quantizer.kind, *cfg.theory_delta);
    p.quantizer.randomness = cfg.quantizer.randomness;
    p.delta = p.quantizer.delta();
  } else {
    double delta_theory = 0.0;
    switch (cfg.algorithm) {
      case Algorithm::Moniqua: {
        TheoryParams tp = dpsgd_params(cfg.n, base.rho(), schedule, 1.0, cfg.theory_log_base,
                                       cfg.theory_theta_form);
        delta_theory = tp.delta;
        break;
      }
      case Algorithm::MoniquaD2: {
        TheoryParams tp = d2_params(base, p.alpha0, 1.0);
        delta_theory = tp.delta;
        break;
      }
      case Algorithm::MoniquaAdpsgd: {
        TheoryParams tp = adpsgd_params(p.tmix, p.alpha0, 1.0);
        delta_theory = tp.delta;
        break;
      }
      default: break;
    }
    p.quantizer = quantizer_for_delta(cfg.quantizer.kind, delta_theory);
    p.quantizer.randomness = cfg.quantizer.randomness;
    p.delta = p.quantizer.delta();
  }

  // slack ratio
  if (cfg.theory_gamma_auto) {
    if (p.quantizer.kind == QuantKind::Exact)
      fail(Err::ConfigValidation, "theory.gamma = auto needs a finite quantizer delta");
    p.gamma = one_bit_gamma(base.rho(), p.delta, cfg.n, std::max<std::uint64_t>(cfg.iters, 2),
                            cfg.theory_log_base);
  } else if (cfg.theory_gamma) {
    p.gamma = *cfg.theory_gamma;
  }

  // a priori bound theta
  if (cfg.theory_theta) {
    if (!(*cfg.theory_theta > 0.0))
      fail(Err::ConfigValidation, "key theory.theta: must be positive");
    p.theta0 = *cfg.theory_theta;
    p.theta_constant = true;
  } else {
    need_g_inf();
    switch (cfg.algorithm) {
      case Algorithm::Moniqua: {
        if (p.gamma < 1.0) {
          p.theta0 = one_bit_theta(p.alpha0, p.g_inf, cfg.n, base.rho(), p.gamma,
                                   cfg.theory_log_base);
          p.theta_constant = true;
        } else {
          TheoryParams tp = dpsgd_params(cfg.n, base.rho(), schedule, p.g_inf,
                                         cfg.theory_log_base, cfg.theory_theta_form);
          p.theta_coeff = tp.theta_coeff;
          p.theta0 = tp.theta0;
        }
        break;
      }
      case Algorithm::MoniquaD2: {
        TheoryParams tp = d2_params(base, p.alpha0, p.g_inf);
        p.theta_coeff = tp.theta_coeff;
        p.theta0 = tp.theta0;
        p.theta_constant = true;  // constant step
        break;
      }
      case Algorithm::MoniquaAdpsgd: {
        TheoryParams tp = adpsgd_params(p.tmix, p.alpha0, p.g_inf);
        p.theta_coeff = tp.theta_coeff;
        p.theta0 = tp.theta0;
        p.theta_constant = true;
        break;
      }
      default: break;
    }
  }

  ModuloCodec codec = ModuloCodec::from_quantizer(p.theta0, p.quantizer);
  p.bits_per_coord = codec.wire_bits();
  return p;
}

RunResult run_experiment(const ExperimentConfig& cfg) {
  const CommMatrix base = build_topology(cfg);
  const ObjectiveSpec objective = build_objective(cfg);
  ResolvedParams params = resolve_params(cfg, base, objective);
  const StepSchedule schedule = build_schedule(cfg, objective);
  const CommMatrix comm = params.gamma < 1.0 ? slack_matrix(base, params.gamma) : base;

  GradOracle oracle(&objective, cfg.seed);
  const CounterRng qrng(cfg.seed, Stream::QuantShared);
  const CounterRng stale_rng(cfg.seed, Stream::Staleness);
  const int n = cfg.n;
  const int d = cfg.objective_dim;

  std::vector<WorkerState> states = init_states(n, d);
  ConsensusGuard guard;
  guard.mode = cfg.guard;
  guard.theta_k = params.theta0;

  RunResult result;
  result.trace.config_digest = cfg.digest();
  result.trace.seed = cfg.seed;
  result.trace.code_version = kCodeVersion;

  std::uint64_t bits_cum = 0;
  auto theta_at = [&](std::uint64_t k) {
    if (!cfg.uses_codec()) return 0.0;
    if (params.theta_constant || params.theta_coeff == 0.0) return params.theta0;
    return params.theta_coeff * schedule.alpha(k);
  };
  auto record = [&](std::uint64_t k) {
    result.trace.records.push_back(
        make_record(k, states, objective, theta_at(k), bits_cum, guard.log.size()));
  };

  GossipSchedule pair_schedule;
  if (cfg.algorithm == Algorithm::MoniquaAdpsgd)
    pair_schedule = GossipSchedule::uniform_ring_pairs(n, cfg.seed, params.tmix);

  std::vector<double> prev_mean(d, 0.0);
  std::vector<double> prev_gmean(d, 0.0);

  try {
    for (std::uint64_t k = 0; k < cfg.iters; ++k) {
      if (k % cfg.record_every == 0) record(k);
      const double alpha = schedule.alpha(k);

      std::vector<double> mean_before, gmean;
      if (cfg.mean_check) mean_before = mean_model(states);

      switch (cfg.algorithm) {
        case Algorithm::Dpsgd: {
          auto grads = sample_all_gradients(oracle, n, states, k);
          if (cfg.mean_check) {
            gmean.assign(d, 0.0);
            for (int i = 0; i < n; ++i)
              for (int c = 0; c < d; ++c) gmean[c] += alpha * grads[i][c] / n;
          }
          bits_cum += step_dpsgd_full(states, comm, alpha, grads);
          break;
        }
        case Algorithm::DpsgdNaive: {
          auto grads = sample_all_gradients(oracle, n, states, k);
          bits_cum += step_dpsgd_naive(states, comm, alpha, grads, params.quantizer, qrng, k);
          break;
        }
        case Algorithm::Moniqua: {
          auto grads = sample_all_gradients(oracle, n, states, k);
          if (cfg.mean_check) {
            gmean.assign(d, 0.0);
            for (int i = 0; i < n; ++i)
              for (int c = 0; c < d; ++c) gmean[c] += alpha * grads[i][c] / n;
          }
          const ModuloCodec codec = ModuloCodec::from_quantizer(theta_at(k), params.quantizer);
          bits_cum += step_moniqua(states, comm, codec, params.quantizer, alpha, grads, qrng,
                                   k, guard);
          break;
        }
        case Algorithm::MoniquaD2: {
          auto grads = sample_all_gradients(oracle, n, states, k);
          if (cfg.mean_check) {
            // mean recursion of the extrapolated half-step
            gmean.assign(d, 0.0);
            std::vector<double> gm(d, 0.0);
            for (int i = 0; i < n; ++i)
              for (int c = 0; c < d; ++c) gm[c] += grads[i][c] / n;
            for (int c = 0; c < d; ++c)
              gmean[c] = alpha * gm[c] - alpha * prev_gmean[c] -
                         (mean_before[c] - prev_mean[c]);
            prev_gmean = gm;
          }
          const ModuloCodec codec = ModuloCodec::from_quantizer(theta_at(k), params.quantizer);
          bits_cum += step_moniqua_d2(states, comm, codec, params.quantizer, alpha, grads,
                                      qrng, k, guard);
          break;
        }
        case Algorithm::MoniquaAdpsgd: {
          const ModuloCodec codec = ModuloCodec::from_quantizer(params.theta0, params.quantizer);
          if (cfg.mean_check) {
            auto [wi, wj] = pair_schedule.pair_at(k);
            (void)wj;
            std::uint64_t tau = stale_rng.pick(static_cast<std::uint64_t>(cfg.adpsgd_T) + 1, k);
            tau = std::min<std::uint64_t>(tau, k);
            const std::uint64_t at = k - tau;
            const std::vector<double>* snap = &states[wi].x;
            for (auto it = states[wi].history.rbegin(); it != states[wi].history.rend(); ++it)
              if (it->from_event <= at) {
                snap = &it->model;
                break;
              }
            const std::vector<double> g = oracle.sample(wi, *snap, k);
            gmean.assign(d, 0.0);
            for (int c = 0; c < d; ++c) gmean[c] = alpha * g[c] / n;
          }
          bits_cum += event_moniqua_adpsgd(states, pair_schedule, codec, params.quantizer,
                                           alpha, oracle, k, cfg.adpsgd_T, stale_rng, qrng,
                                           guard);
          break;
        }
      }

      if (cfg.mean_check) {
        check_mean_step(mean_before, mean_model(states), gmean, k);
        prev_mean = mean_before;
      }
    }
  } catch (const Error& e) {
    if (e.code() == Err::ConsensusViolated || e.code() == Err::RecoveryVerificationFailed)
      throw;
    fail(Err::Runtime, "run aborted: " + std::string(e.what()));
  }
  record(cfg.iters);

  result.final_states = std::move(states);
  result.params = params;
  return result;
}

namespace {
std::string fmt_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}
}  // namespace

std::string params_report(const ExperimentConfig& cfg, bool as_json) {
  const CommMatrix base = build_topology(cfg);
  const ObjectiveSpec objective = build_objective(cfg);
  const ResolvedParams p = resolve_params(cfg, base, objective);

  std::vector<std::pair<std::string, std::string>> rows = {
      {"algorithm", to_string(cfg.algorithm)},
      {"n", std::to_string(cfg.n)},
      {"rho", fmt_real(p.rho)},
      {"lambda2", fmt_real(p.lambda2)},
      {"lambdaN", fmt_real(p.lambdaN)},
      {"phi", fmt_real(p.phi)},
      {"alpha0", fmt_real(p.alpha0)},
      {"g_inf", fmt_real(p.g_inf)},
      {"g_inf_provenance", p.g_inf_provenance == ParamProvenance::Manual
                               ? "manual"
                               : (p.g_inf_provenance == ParamProvenance::WarmupEstimated
                                      ? "warmup-estimated"
                                      : "prescribed")},
      {"theta0", fmt_real(p.theta0)},
      {"theta_coeff", fmt_real(p.theta_coeff)},
      {"delta", fmt_real(p.delta)},
      {"gamma", fmt_real(p.gamma)},
      {"quantizer.kind", to_string(p.quantizer.kind)},
      {"quantizer.step", fmt_real(p.quantizer.step)},
      {"bits_per_coord", std::to_string(p.bits_per_coord)},
      {"bits_budget_bound", std::to_string(p.bits_budget)},
      {"mixing_time_bound", fmt_real(mixing_time_bound(p.rho, cfg.n))},
  };
  if (cfg.uses_codec() && p.quantizer.kind != QuantKind::Exact)
    rows.emplace_back("bits_required", std::to_string(bits_required(p.delta)));
  if (cfg.algorithm == Algorithm::MoniquaAdpsgd) {
    rows.emplace_back("tmix", std::to_string(p.tmix));
    rows.emplace_back("adpsgd.T", std::to_string(cfg.adpsgd_T));
  }

  if (as_json) {
    nlohmann::json j;
    for (const auto& [k, v] : rows) {
      char* end = nullptr;
      const double num = std::strtod(v.c_str(), &end);
      if (end && *end == '\0')
        j[k] = num;
      else
        j[k] = v;
    }
    return j.dump(2) + "\n";
  }
  std::size_t width = 0;
  for (const auto& [k, v] : rows) width = std::max(width, k.size());
  std::ostringstream out;
  for (const auto& [k, v] : rows)
    out << k << std::string(width - k.size(), ' ') << " = " << v << "\n";
  return out.str();
}

std::vector<SweepOutcome> sweep(const ExperimentConfig& base, const std::string& axis_key,
                                const std::vector<std::string>& values,
                                const std::string& out_dir, bool json_format) {
  if (!is_config_key(axis_key))
    fail(Err::ConfigValidation, "sweep axis key '" + axis_key + "' is not a config key");
  std::vector<SweepOutcome> outcomes;
  std::filesystem::create_directories(out_dir);
  for (const std::string& v : values) {
    SweepOutcome oc;
    oc.value = v;
    try {
      std::string text;
      for (const auto& [k, val] : base.raw)
        if (k != axis_key) text += k + " = " + val + "\n";
      text += axis_key + " = " + v + "\n";
      ExperimentConfig cfg = parse_config_text(text, "<sweep>");
      RunResult r = run_experiment(cfg);
      std::string fname = axis_key + "_" + v;
      for (char& c : fname)
        if (c == '.' || c == '/' ) c = '_';
      oc.out_path = out_dir + "/" + fname + (json_format ? ".json" : ".csv");
      if (json_format)
        write_trace_json(r.trace, oc.out_path);
      else
        write_trace_csv(r.trace, oc.out_path);
      oc.ok = true;
    } catch (const std::exception& e) {
      oc.ok = false;
      oc.error = e.what();
    }
    outcomes.push_back(std::move(oc));
  }
  return outcomes;
}

}  // namespace moniqua
