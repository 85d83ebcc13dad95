#pragma once

#include <stdexcept>
#include <string>

namespace moniqua {

enum class Err {
  InvalidTopology,
  InvalidParameter,
  InvalidPair,
  InvalidModulus,
  NumericInput,
  Encoding,
  UnsupportedQuantizer,
  CodecMismatch,
  RecoveryVerificationFailed,
  ConsensusViolated,
  D2AssumptionViolated,
  StateError,
  Diverged,
  ConfigParse,
  ConfigValidation,
  Io,
  Runtime,
};

class Error : public std::runtime_error {
public:
  Error(Err code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Err code() const { return code_; }

  // Validation-class failures map to CLI exit 1, runtime-class to exit 2.
  bool is_validation() const {
    switch (code_) {
      case Err::InvalidTopology:
      case Err::InvalidParameter:
      case Err::InvalidPair:
      case Err::InvalidModulus:
      case Err::NumericInput:
      case Err::UnsupportedQuantizer:
      case Err::ConfigParse:
      case Err::ConfigValidation:
        return true;
      default:
        return false;
    }
  }

private:
  Err code_;
};

[[noreturn]] inline void fail(Err code, const std::string& what) { throw Error(code, what); }

}  // namespace moniqua
