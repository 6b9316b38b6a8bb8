#pragma once

#include <stdexcept>
#include <string>

namespace xover {

/// Failure conditions raised by the library, grouped by the process exit
/// code the CLI maps them to: 1 validation, 2 computational degeneracy,
/// 3 enumeration cap exceeded.
enum class errc {
  // validation (exit 1)
  empty_grid,
  ragged_rows,
  unknown_label,
  bad_parameter,
  not_positive_definite,
  dimension_mismatch,
  not_prime,
  not_an_oa,
  bad_grid,
  io_error,
  // computational degeneracy (exit 2)
  singular_v,
  degenerate_reference,
  zero_trace,
  zero_e22,
  // resource limits (exit 3)
  cap_exceeded,
};

const char* errc_name(errc code) noexcept;
int exit_code(errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code) {}

  errc code() const noexcept { return code_; }
  int exit_code() const noexcept { return xover::exit_code(code_); }

 private:
  errc code_;
};

[[noreturn]] inline void raise(errc code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace xover
