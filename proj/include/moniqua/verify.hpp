#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace moniqua {

// Deliberate fault hooks used to prove the suites are not vacuous: an
// injected halving of the decode error bound must turn the codec suite red.
enum class FaultInjection { None, CodecBoundHalved };

struct SuiteResult {
  std::string name;
  bool pass = false;
  double margin = 0.0;  // measured worst value relative to its bound
  std::string detail;
};

// Runs the named invariant suite ("recovery", "codec_bound", "quantizer",
// "mixing", "mean_preservation", "shared_randomness" or "all") and returns
// one result per suite with the measured margins.
std::vector<SuiteResult> verify_suite(const std::string& selector,
                                      FaultInjection fault = FaultInjection::None);

bool all_pass(const std::vector<SuiteResult>& results);

}  // namespace moniqua
