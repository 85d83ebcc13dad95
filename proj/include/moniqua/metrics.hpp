#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace moniqua {

struct MetricsRecord {
  std::uint64_t k = 0;
  double loss = 0.0;           // f(mean model)
  double grad_norm_sq = 0.0;   // ||grad f(mean model)||^2
  double consensus_inf = 0.0;  // max pairwise inf-norm distance
  double consensus_l2 = 0.0;   // (1/n) sum ||mean - x_i||^2
  double theta_k = 0.0;
  std::uint64_t bits_cum = 0;
  std::uint64_t violations = 0;

  bool operator==(const MetricsRecord&) const = default;
};

struct MetricsTrace {
  std::string config_digest;
  std::uint64_t seed = 0;
  std::string code_version;
  std::vector<MetricsRecord> records;

  bool operator==(const MetricsTrace&) const = default;
};

// CSV columns, in this exact order:
// k,loss,grad_norm_sq,consensus_inf,consensus_l2,theta_k,bits_cum,violations
void write_trace_csv(const MetricsTrace& trace, const std::string& path);
std::string trace_csv_string(const MetricsTrace& trace);

void write_trace_json(const MetricsTrace& trace, const std::string& path);
std::string trace_json_string(const MetricsTrace& trace);
MetricsTrace read_trace_json(const std::string& path);
MetricsTrace parse_trace_json(const std::string& text);

}  // namespace moniqua
