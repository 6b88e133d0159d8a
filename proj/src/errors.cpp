#include "rebound/errors.hpp"

namespace rebound {

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::nonpositive_distance: return "NONPOSITIVE_DISTANCE";
    case Errc::overflow: return "OVERFLOW";
    case Errc::divergent_integral: return "DIVERGENT_INTEGRAL";
    case Errc::quadrature_failure: return "QUADRATURE_FAILURE";
    case Errc::step_failure: return "STEP_FAILURE";
    case Errc::undefined_t0: return "UNDEFINED_T0";
    case Errc::parse_error: return "PARSE_ERROR";
    case Errc::validation_error: return "VALIDATION_ERROR";
    case Errc::io_error: return "IO_ERROR";
  }
  return "UNKNOWN_ERROR";
}

}  // namespace rebound
