#pragma once

#include <string>
#include <vector>

#include "moniqua/config.hpp"
#include "moniqua/metrics.hpp"

namespace moniqua {

inline const char* kCodeVersion = "moniqua 0.1.0";

// Everything the runner pinned down before stepping: step size, codec
// parameters, slack ratio, gradient bound, mixing window and bit widths.
struct ResolvedParams {
  double alpha0 = 0.0;
  double theta_coeff = 0.0;  // theta_k = theta_coeff * alpha_k when scheduled
  double theta0 = 0.0;
  bool theta_constant = false;
  double delta = 0.0;
  double gamma = 1.0;
  double g_inf = 0.0;
  ParamProvenance g_inf_provenance = ParamProvenance::Manual;
  int tmix = 0;
  int bits_per_coord = 0;
  int bits_budget = 0;
  double rho = 0.0, lambda2 = 0.0, lambdaN = 0.0, phi = 0.0;
  QuantizerSpec quantizer;
};

struct RunResult {
  MetricsTrace trace;
  std::vector<WorkerState> final_states;
  ResolvedParams params;
};

// Resolves every derived parameter for the configured algorithm, running the
// warmup gradient-bound estimate and the mixing-time calibration when asked.
ResolvedParams resolve_params(const ExperimentConfig& cfg, const CommMatrix& base,
                              const ObjectiveSpec& objective);

ObjectiveSpec build_objective(const ExperimentConfig& cfg);

// Executes the configured algorithm for `iters` iterations (or events),
// recording metrics every record_every steps. Deterministic for a fixed seed
// regardless of thread count.
RunResult run_experiment(const ExperimentConfig& cfg);

// Aligned key=value report of all resolved theory parameters plus the bit
// accounting for the given config.
std::string params_report(const ExperimentConfig& cfg, bool as_json);

struct SweepOutcome {
  std::string value;
  bool ok = false;
  std::string error;
  std::string out_path;
};

// One run per axis value, shared seed, outputs suffixed by value. Per-run
// errors are recorded and the sweep continues.
std::vector<SweepOutcome> sweep(const ExperimentConfig& base, const std::string& axis_key,
                                const std::vector<std::string>& values,
                                const std::string& out_dir, bool json_format);

}  // namespace moniqua
