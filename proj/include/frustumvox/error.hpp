#pragma once

#include <stdexcept>
#include <string>

namespace fvx {

enum class ErrorCode {
  invalid_argument,
  io,
  format,
  empty_input,
  no_center,
  no_candidates,
  unsupported_scale,
  encode_domain,
  infeasible,
  shape_mismatch,
  invariant_violation,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid argument";
    case ErrorCode::io: return "i/o";
    case ErrorCode::format: return "malformed input";
    case ErrorCode::empty_input: return "empty input";
    case ErrorCode::no_center: return "no center";
    case ErrorCode::no_candidates: return "no candidates";
    case ErrorCode::unsupported_scale: return "unsupported scale";
    case ErrorCode::encode_domain: return "encode domain";
    case ErrorCode::infeasible: return "infeasible";
    case ErrorCode::shape_mismatch: return "shape mismatch";
    case ErrorCode::invariant_violation: return "invariant violation";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, const std::string& what,
                    ErrorCode code = ErrorCode::invalid_argument) {
  if (!cond) {
    throw Error(code, what);
  }
}

}  // namespace fvx
