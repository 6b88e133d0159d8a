#pragma once

#include <stdexcept>
#include <string>

namespace rebound {

// Failure vocabulary shared across the library.  Each code maps to a process
// exit class in the CLI: config/usage problems exit 1, numerical failures
// exit 2 (see cli.cpp).
enum class Errc {
  nonpositive_distance,  // model evaluated at h <= 0
  overflow,              // h^p would overflow/underflow past double range
  divergent_integral,    // lubrication integral diverges for the given shape
  quadrature_failure,    // adaptive quadrature could not meet its tolerance
  step_failure,          // step-size control gave up (too many rejections)
  undefined_t0,          // free-fall contact time needs hdot0 < 0
  parse_error,           // malformed JSON / CSV
  validation_error,      // well-formed input violating a documented constraint
  io_error,              // filesystem trouble
};

const char* errc_name(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) {
  throw Error(code, message);
}

// Validation failures always name the offending field and the constraint.
[[noreturn]] inline void fail_validation(const std::string& field,
                                         const std::string& constraint) {
  throw Error(Errc::validation_error, field + " " + constraint);
}

}  // namespace rebound
