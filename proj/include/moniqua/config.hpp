#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "moniqua/algos.hpp"
#include "moniqua/objectives.hpp"
#include "moniqua/quant.hpp"
#include "moniqua/theory.hpp"

namespace moniqua {

enum class Algorithm { Dpsgd, DpsgdNaive, Moniqua, MoniquaD2, MoniquaAdpsgd };

Algorithm parse_algorithm(const std::string& s);
std::string to_string(Algorithm a);

enum class Topology { Ring, RingLazy, Complete, Custom };

// Flat key=value experiment description. Dotted keys select module blocks;
// unknown keys are rejected. The digest is FNV-1a-64 over the sorted
// key=value lines, so any key change alters it.
struct ExperimentConfig {
  Topology topology = Topology::Ring;
  int n = 8;
  std::string topology_file;

  Algorithm algorithm = Algorithm::Dpsgd;
  std::uint64_t iters = 1000;
  std::uint64_t seed = 1;
  GuardMode guard = GuardMode::Off;
  std::uint64_t record_every = 10;
  bool mean_check = false;

  QuantizerSpec quantizer;
  bool quantizer_step_set = false;

  ObjectiveKind objective_kind = ObjectiveKind::LeastSquares;
  int objective_dim = 10;
  double objective_noise_b = 0.0;
  double objective_spread = 1.0;
  int objective_samples = 32;
  bool objective_shared_design = false;
  double objective_l2_reg = 0.1;

  StepKind step_kind = StepKind::Constant;
  double step_alpha0 = 0.05;
  double step_c_alpha = 1.0;
  double step_eta = 1.0;

  std::optional<double> theory_theta;
  std::optional<double> theory_delta;
  std::optional<double> theory_gamma;  // slack ratio; "auto" resolves the 1-bit formula
  bool theory_gamma_auto = false;
  std::optional<double> theory_g_inf;
  int theory_warmup_iters = 50;
  double theory_safety = 2.0;
  LogBase theory_log_base = LogBase::E;
  ThetaForm theory_theta_form = ThetaForm::Main;

  int adpsgd_T = 4;
  std::optional<int> adpsgd_tmix;  // absent => calibrated empirically

  std::map<std::string, std::string> raw;

  std::string digest() const;
  bool uses_codec() const {
    return algorithm == Algorithm::Moniqua || algorithm == Algorithm::MoniquaD2 ||
           algorithm == Algorithm::MoniquaAdpsgd;
  }
};

// Parses, defaults and cross-validates; parse errors carry line numbers and
// validation errors name the offending key.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin);

bool is_config_key(const std::string& key);

// Builds the configured mixing matrix (slack ratio not yet applied).
CommMatrix build_topology(const ExperimentConfig& cfg);

}  // namespace moniqua
