#pragma once

#include <stdexcept>
#include <string>

namespace exaq {

enum class ErrorCode {
  invalid_argument,
  io_failure,
  bad_magic,
  bad_version,
  truncated,
  non_finite,
  size_mismatch,
  empty_input,
  boundary_solution,
  non_convergence,
  contract_violation,
  lut_mismatch,
};

const char* to_string(ErrorCode code) noexcept;

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace exaq
