#include "moniqua/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "moniqua/codec.hpp"
#include "moniqua/error.hpp"

namespace moniqua {

Algorithm parse_algorithm(const std::string& s) {
  if (s == "dpsgd") return Algorithm::Dpsgd;
  if (s == "dpsgd_naive") return Algorithm::DpsgdNaive;
  if (s == "moniqua") return Algorithm::Moniqua;
  if (s == "moniqua_d2") return Algorithm::MoniquaD2;
  if (s == "moniqua_adpsgd") return Algorithm::MoniquaAdpsgd;
  fail(Err::ConfigValidation, "unknown algorithm: " + s);
}

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Dpsgd: return "dpsgd";
    case Algorithm::DpsgdNaive: return "dpsgd_naive";
    case Algorithm::Moniqua: return "moniqua";
    case Algorithm::MoniquaD2: return "moniqua_d2";
    case Algorithm::MoniquaAdpsgd: return "moniqua_adpsgd";
  }
  return "?";
}

namespace {

const std::set<std::string> kKnownKeys = {
    "topology", "n", "topology.file",
    "algorithm", "iters", "seed", "guard", "record_every", "mean_check",
    "quantizer.kind", "quantizer.step", "quantizer.keep_prob", "quantizer.shared_randomness",
    "objective.kind", "objective.dim", "objective.noise_b", "objective.spread",
    "objective.samples", "objective.shared_design", "objective.l2_reg",
    "step.kind", "step.alpha0", "step.c_alpha", "step.eta",
    "theory.theta", "theory.delta", "theory.gamma", "theory.g_inf",
    "theory.warmup_iters", "theory.safety", "theory.log_base", "theory.theta_form",
    "adpsgd.T", "adpsgd.tmix",
};

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  std::size_t b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

double to_real(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (...) {
    fail(Err::ConfigValidation, "key " + key + ": expected a real number, got '" + v + "'");
  }
}

std::int64_t to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    std::int64_t r = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (...) {
    fail(Err::ConfigValidation, "key " + key + ": expected an integer, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  fail(Err::ConfigValidation, "key " + key + ": expected true|false, got '" + v + "'");
}

}  // namespace

std::string ExperimentConfig::digest() const {
  std::string canon;
  for (const auto& [k, v] : raw) {  // std::map iterates sorted
    canon += k;
    canon += '=';
    canon += v;
    canon += '\n';
  }
  const std::uint64_t h =
      fnv1a64(reinterpret_cast<const std::uint8_t*>(canon.data()), canon.size());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      fail(Err::ConfigParse, origin + ":" + std::to_string(lineno) + ":" +
                                 std::to_string(line.size()) +
                                 ": expected key = value, got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      fail(Err::ConfigParse, origin + ":" + std::to_string(lineno) + ":" +
                                 std::to_string(eq + 1) + ": empty key or value");
    if (!kKnownKeys.count(key))
      fail(Err::ConfigValidation,
           origin + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    if (cfg.raw.count(key))
      fail(Err::ConfigValidation,
           origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    cfg.raw[key] = value;
  }

  for (const auto& [key, v] : cfg.raw) {
    if (key == "topology") {
      if (v == "ring") cfg.topology = Topology::Ring;
      else if (v == "ring_lazy") cfg.topology = Topology::RingLazy;
      else if (v == "complete") cfg.topology = Topology::Complete;
      else if (v == "custom") cfg.topology = Topology::Custom;
      else fail(Err::ConfigValidation, "key topology: unknown value '" + v + "'");
    } else if (key == "n") {
      cfg.n = static_cast<int>(to_int(key, v));
    } else if (key == "topology.file") {
      cfg.topology_file = v;
    } else if (key == "algorithm") {
      cfg.algorithm = parse_algorithm(v);
    } else if (key == "iters") {
      cfg.iters = static_cast<std::uint64_t>(to_int(key, v));
    } else if (key == "seed") {
      cfg.seed = static_cast<std::uint64_t>(to_int(key, v));
    } else if (key == "guard") {
      if (v == "off") cfg.guard = GuardMode::Off;
      else if (v == "assert") cfg.guard = GuardMode::Assert;
      else if (v == "verify_hash") cfg.guard = GuardMode::VerifyHash;
      else fail(Err::ConfigValidation, "key guard: unknown value '" + v + "'");
    } else if (key == "record_every") {
      cfg.record_every = static_cast<std::uint64_t>(to_int(key, v));
    } else if (key == "mean_check") {
      cfg.mean_check = to_bool(key, v);
    } else if (key == "quantizer.kind") {
      cfg.quantizer.kind = parse_quant_kind(v);
    } else if (key == "quantizer.step") {
      cfg.quantizer.step = to_real(key, v);
      cfg.quantizer_step_set = true;
    } else if (key == "quantizer.keep_prob") {
      cfg.quantizer.keep_prob = to_real(key, v);
    } else if (key == "quantizer.shared_randomness") {
      cfg.quantizer.randomness =
          to_bool(key, v) ? RandomnessPolicy::Shared : RandomnessPolicy::Independent;
    } else if (key == "objective.kind") {
      cfg.objective_kind = parse_objective_kind(v);
    } else if (key == "objective.dim") {
      cfg.objective_dim = static_cast<int>(to_int(key, v));
    } else if (key == "objective.noise_b") {
      cfg.objective_noise_b = to_real(key, v);
    } else if (key == "objective.spread") {
      cfg.objective_spread = to_real(key, v);
    } else if (key == "objective.samples") {
      cfg.objective_samples = static_cast<int>(to_int(key, v));
    } else if (key == "objective.shared_design") {
      cfg.objective_shared_design = to_bool(key, v);
    } else if (key == "objective.l2_reg") {
      cfg.objective_l2_reg = to_real(key, v);
    } else if (key == "step.kind") {
      if (v == "constant") cfg.step_kind = StepKind::Constant;
      else if (v == "inv_sqrt") cfg.step_kind = StepKind::InvSqrt;
      else if (v == "tuned") cfg.step_kind = StepKind::TunedConstant;
      else fail(Err::ConfigValidation, "key step.kind: unknown value '" + v + "'");
    } else if (key == "step.alpha0") {
      cfg.step_alpha0 = to_real(key, v);
    } else if (key == "step.c_alpha") {
      cfg.step_c_alpha = to_real(key, v);
    } else if (key == "step.eta") {
      cfg.step_eta = to_real(key, v);
    } else if (key == "theory.theta") {
      cfg.theory_theta = to_real(key, v);
    } else if (key == "theory.delta") {
      cfg.theory_delta = to_real(key, v);
    } else if (key == "theory.gamma") {
      if (v == "auto") cfg.theory_gamma_auto = true;
      else cfg.theory_gamma = to_real(key, v);
    } else if (key == "theory.g_inf") {
      cfg.theory_g_inf = to_real(key, v);
    } else if (key == "theory.warmup_iters") {
      cfg.theory_warmup_iters = static_cast<int>(to_int(key, v));
    } else if (key == "theory.safety") {
      cfg.theory_safety = to_real(key, v);
    } else if (key == "theory.log_base") {
      if (v == "e") cfg.theory_log_base = LogBase::E;
      else if (v == "2") cfg.theory_log_base = LogBase::Two;
      else fail(Err::ConfigValidation, "key theory.log_base: expected e|2, got '" + v + "'");
    } else if (key == "theory.theta_form") {
      if (v == "main") cfg.theory_theta_form = ThetaForm::Main;
      else if (v == "appendix") cfg.theory_theta_form = ThetaForm::Appendix;
      else fail(Err::ConfigValidation, "key theory.theta_form: expected main|appendix");
    } else if (key == "adpsgd.T") {
      cfg.adpsgd_T = static_cast<int>(to_int(key, v));
    } else if (key == "adpsgd.tmix") {
      if (v != "auto") cfg.adpsgd_tmix = static_cast<int>(to_int(key, v));
    }
  }

  // cross-field validation
  if (cfg.n < 2) fail(Err::ConfigValidation, "key n: need at least 2 workers");
  if (cfg.objective_dim < 1) fail(Err::ConfigValidation, "key objective.dim: need >= 1");
  if (cfg.record_every < 1) fail(Err::ConfigValidation, "key record_every: need >= 1");
  if (cfg.topology == Topology::Custom && cfg.topology_file.empty())
    fail(Err::ConfigValidation, "topology = custom requires topology.file");
  if (cfg.theory_delta && !(*cfg.theory_delta > 0.0 && *cfg.theory_delta < 0.5))
    fail(Err::ConfigValidation,
         "key theory.delta: the codec requires 0 < delta < 1/2, got " +
             std::to_string(*cfg.theory_delta));
  if (cfg.theory_delta && cfg.quantizer_step_set)
    fail(Err::ConfigValidation,
         "set either quantizer.step or theory.delta, not both");
  if (cfg.theory_gamma && !(*cfg.theory_gamma > 0.0 && *cfg.theory_gamma <= 1.0))
    fail(Err::ConfigValidation, "key theory.gamma: slack ratio must be in (0,1]");
  if (cfg.guard == GuardMode::VerifyHash && !cfg.uses_codec())
    fail(Err::ConfigValidation,
         "guard = verify_hash requires a codec algorithm (moniqua*)");
  if (cfg.uses_codec() && cfg.quantizer.kind == QuantKind::RandomizedGossip)
    fail(Err::ConfigValidation,
         "quantizer.kind = randomized_gossip has no finite error bound on [-1/2,1/2) "
         "and cannot back a codec algorithm");
  if (cfg.algorithm == Algorithm::MoniquaAdpsgd &&
      !(cfg.topology == Topology::Ring || cfg.topology == Topology::RingLazy))
    fail(Err::ConfigValidation,
         "moniqua_adpsgd gossips with uniform random ring neighbors; use a ring topology");
  if (cfg.algorithm == Algorithm::MoniquaD2 && cfg.step_kind == StepKind::InvSqrt)
    fail(Err::ConfigValidation, "moniqua_d2 uses a constant step size");
  if (cfg.adpsgd_T < 0) fail(Err::ConfigValidation, "key adpsgd.T: need >= 0");
  if (cfg.objective_kind == ObjectiveKind::LeastSquares &&
      cfg.objective_samples < cfg.objective_dim)
    fail(Err::ConfigValidation, "key objective.samples: least squares needs samples >= dim");
  if (cfg.mean_check && cfg.algorithm == Algorithm::DpsgdNaive)
    fail(Err::ConfigValidation,
         "mean_check does not hold for dpsgd_naive: direct quantization biases the mean");
  if (cfg.algorithm == Algorithm::MoniquaD2) {
    CommMatrix m = build_topology(cfg);
    if (!(m.lambdaN() > -1.0 / 3.0))
      fail(Err::ConfigValidation,
           "lambdaN = " + std::to_string(m.lambdaN()) +
               " violates the variance-reduction assumption lambdaN > -1/3 "
               "(use ring_lazy or complete)");
  }
  return cfg;
}

bool is_config_key(const std::string& key) { return kKnownKeys.count(key) > 0; }

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Err::ConfigValidation, "cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

CommMatrix build_topology(const ExperimentConfig& cfg) {
  switch (cfg.topology) {
    case Topology::Ring: return ring_matrix(cfg.n, false);
    case Topology::RingLazy: return ring_matrix(cfg.n, true);
    case Topology::Complete: return complete_matrix(cfg.n);
    case Topology::Custom: {
      std::ifstream in(cfg.topology_file);
      if (!in) fail(Err::ConfigValidation, "cannot open topology file " + cfg.topology_file);
      std::vector<double> w;
      double v;
      while (in >> v) w.push_back(v);
      if (w.size() != static_cast<std::size_t>(cfg.n) * cfg.n)
        fail(Err::ConfigValidation,
             "topology file holds " + std::to_string(w.size()) + " entries, expected " +
                 std::to_string(cfg.n) + "x" + std::to_string(cfg.n));
      return CommMatrix::from_weights(cfg.n, std::move(w));
    }
  }
  fail(Err::ConfigValidation, "unhandled topology");
}

}  // namespace moniqua
