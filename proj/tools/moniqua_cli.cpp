#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "moniqua/error.hpp"
#include "moniqua/harness.hpp"
#include "moniqua/metrics.hpp"
#include "moniqua/verify.hpp"

namespace {

int exit_code_for(const moniqua::Error& e) { return e.is_validation() ? 1 : 2; }

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation laboratory for modulo-quantized decentralized SGD"};
  app.require_subcommand(1);

  std::string run_config, run_out = "trace.csv", run_format = "csv";
  CLI::App* run_cmd = app.add_subcommand("run", "Execute one experiment config");
  run_cmd->add_option("config", run_config, "Path to the config file")->required();
  run_cmd->add_option("--out", run_out, "Output trace path");
  run_cmd->add_option("--format", run_format, "Trace format: csv|json")
      ->check(CLI::IsMember({"csv", "json"}));

  std::string verify_selector = "all", verify_fault = "none";
  CLI::App* verify_cmd = app.add_subcommand("verify", "Run the invariant suites");
  verify_cmd->add_option("suite", verify_selector,
                         "Suite: all|recovery|codec_bound|quantizer|mixing|"
                         "mean_preservation|shared_randomness");
  verify_cmd
      ->add_option("--inject-fault", verify_fault,
                   "Deliberately break a bound to prove test sensitivity")
      ->check(CLI::IsMember({"none", "codec-bound-halved"}));

  std::string params_config;
  bool params_json = false;
  CLI::App* params_cmd =
      app.add_subcommand("params", "Print the resolved theory parameters for a config");
  params_cmd->add_option("config", params_config, "Path to the config file")->required();
  params_cmd->add_flag("--json", params_json, "Emit JSON instead of aligned key=value");

  std::string sweep_config, sweep_axis, sweep_out_dir = "sweep_out", sweep_format = "csv";
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "Run one config across an axis of values");
  sweep_cmd->add_option("config", sweep_config, "Path to the base config")->required();
  sweep_cmd->add_option("--axis", sweep_axis, "key=v1,v2,... axis specification")->required();
  sweep_cmd->add_option("--out-dir", sweep_out_dir, "Directory for the trace set");
  sweep_cmd->add_option("--format", sweep_format, "Trace format: csv|json")
      ->check(CLI::IsMember({"csv", "json"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      moniqua::ExperimentConfig cfg = moniqua::load_config(run_config);
      moniqua::RunResult result = moniqua::run_experiment(cfg);
      if (run_format == "json")
        moniqua::write_trace_json(result.trace, run_out);
      else
        moniqua::write_trace_csv(result.trace, run_out);
      const moniqua::MetricsRecord& last = result.trace.records.back();
      std::printf("run complete: k=%llu loss=%.6g grad_norm_sq=%.6g bits_cum=%llu -> %s\n",
                  static_cast<unsigned long long>(last.k), last.loss, last.grad_norm_sq,
                  static_cast<unsigned long long>(last.bits_cum), run_out.c_str());
      return 0;
    }
    if (*verify_cmd) {
      const moniqua::FaultInjection fault = verify_fault == "codec-bound-halved"
                                                ? moniqua::FaultInjection::CodecBoundHalved
                                                : moniqua::FaultInjection::None;
      const std::vector<moniqua::SuiteResult> results =
          moniqua::verify_suite(verify_selector, fault);
      for (const moniqua::SuiteResult& r : results)
        std::printf("[%s] %-18s %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(),
                    r.detail.c_str());
      return moniqua::all_pass(results) ? 0 : 2;
    }
    if (*params_cmd) {
      moniqua::ExperimentConfig cfg = moniqua::load_config(params_config);
      std::fputs(moniqua::params_report(cfg, params_json).c_str(), stdout);
      return 0;
    }
    if (*sweep_cmd) {
      const std::size_t eq = sweep_axis.find('=');
      if (eq == std::string::npos) {
        std::fprintf(stderr, "sweep axis must look like key=v1,v2,...\n");
        return 1;
      }
      const std::string key = sweep_axis.substr(0, eq);
      const std::vector<std::string> values = split_csv(sweep_axis.substr(eq + 1));
      moniqua::ExperimentConfig base = moniqua::load_config(sweep_config);
      const auto outcomes =
          moniqua::sweep(base, key, values, sweep_out_dir, sweep_format == "json");
      bool any_fail = false;
      for (const auto& oc : outcomes) {
        if (oc.ok)
          std::printf("[ok]   %s = %s -> %s\n", key.c_str(), oc.value.c_str(),
                      oc.out_path.c_str());
        else {
          std::printf("[fail] %s = %s: %s\n", key.c_str(), oc.value.c_str(), oc.error.c_str());
          any_fail = true;
        }
      }
      return any_fail ? 2 : 0;
    }
  } catch (const moniqua::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
