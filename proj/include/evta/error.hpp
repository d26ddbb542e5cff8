#pragma once

#include <stdexcept>
#include <string>

namespace evta {

enum class Errc {
  degenerate_data,
  wrong_degree,
  zero_polynomial,
  out_of_range,
  infeasible_demand,
  slice_fit_failed,
  degree_cap,
  bad_format,
  io_failure,
};

inline const char* to_string(Errc c) {
  switch (c) {
    case Errc::degenerate_data: return "DEGENERATE_DATA";
    case Errc::wrong_degree: return "WRONG_DEGREE";
    case Errc::zero_polynomial: return "ZERO_POLYNOMIAL";
    case Errc::out_of_range: return "OUT_OF_RANGE";
    case Errc::infeasible_demand: return "INFEASIBLE_DEMAND";
    case Errc::slice_fit_failed: return "SLICE_FIT_FAILED";
    case Errc::degree_cap: return "DEGREE_CAP";
    case Errc::bad_format: return "BAD_FORMAT";
    case Errc::io_failure: return "IO_FAILURE";
  }
  return "UNKNOWN";
}

/// Library error carrying a machine-checkable code.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const { return code_; }

 private:
  Errc code_;
};

}  // namespace evta
