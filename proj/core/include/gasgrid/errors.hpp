#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gasgrid {

enum class ErrorCode {
  duplicate_id,
  dangling_endpoint,
  disconnected_graph,
  self_loop,
  missing_flow,
  missing_pressure,
  nonpositive_pressure,
  radicand_nonpositive,
  compressibility_out_of_range,
  dimension_mismatch,
  newton_diverged,
  singular_jacobian_transpose,
  empty_field,
  missing_target,
  parse_error,
  unit_error,
  io_error,
  invalid_argument,
  qp_singular,
};

std::string_view to_string(ErrorCode code);

/// Library-wide exception. The code is stable and is what callers branch on;
/// the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace gasgrid
