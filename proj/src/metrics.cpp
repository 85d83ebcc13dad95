#include "moniqua/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "moniqua/error.hpp"

namespace moniqua {

namespace {
std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  if (!out) fail(Err::Io, "cannot open output file " + path);
  out << body;
  if (!out) fail(Err::Io, "write failed for " + path);
}
}  // namespace

std::string trace_csv_string(const MetricsTrace& trace) {
  std::ostringstream out;
  out << "k,loss,grad_norm_sq,consensus_inf,consensus_l2,theta_k,bits_cum,violations\n";
  for (const MetricsRecord& r : trace.records) {
    out << r.k << ',' << fmt(r.loss) << ',' << fmt(r.grad_norm_sq) << ','
        << fmt(r.consensus_inf) << ',' << fmt(r.consensus_l2) << ',' << fmt(r.theta_k) << ','
        << r.bits_cum << ',' << r.violations << '\n';
  }
  return out.str();
}

void write_trace_csv(const MetricsTrace& trace, const std::string& path) {
  write_file(path, trace_csv_string(trace));
}

std::string trace_json_string(const MetricsTrace& trace) {
  nlohmann::json j;
  j["header"] = {{"config_digest", trace.config_digest},
                 {"seed", trace.seed},
                 {"code_version", trace.code_version}};
  j["records"] = nlohmann::json::array();
  for (const MetricsRecord& r : trace.records) {
    j["records"].push_back({{"k", r.k},
                            {"loss", r.loss},
                            {"grad_norm_sq", r.grad_norm_sq},
                            {"consensus_inf", r.consensus_inf},
                            {"consensus_l2", r.consensus_l2},
                            {"theta_k", r.theta_k},
                            {"bits_cum", r.bits_cum},
                            {"violations", r.violations}});
  }
  return j.dump(2);
}

void write_trace_json(const MetricsTrace& trace, const std::string& path) {
  write_file(path, trace_json_string(trace));
}

MetricsTrace parse_trace_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  MetricsTrace t;
  t.config_digest = j.at("header").at("config_digest").get<std::string>();
  t.seed = j.at("header").at("seed").get<std::uint64_t>();
  t.code_version = j.at("header").at("code_version").get<std::string>();
  for (const auto& rj : j.at("records")) {
    MetricsRecord r;
    r.k = rj.at("k").get<std::uint64_t>();
    r.loss = rj.at("loss").get<double>();
    r.grad_norm_sq = rj.at("grad_norm_sq").get<double>();
    r.consensus_inf = rj.at("consensus_inf").get<double>();
    r.consensus_l2 = rj.at("consensus_l2").get<double>();
    r.theta_k = rj.at("theta_k").get<double>();
    r.bits_cum = rj.at("bits_cum").get<std::uint64_t>();
    r.violations = rj.at("violations").get<std::uint64_t>();
    t.records.push_back(r);
  }
  return t;
}

MetricsTrace read_trace_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Err::Io, "cannot open trace file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_trace_json(ss.str());
}

}  // namespace moniqua
