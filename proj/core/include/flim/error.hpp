#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace flim {

enum class ErrorCode {
  invalid_argument,   // violated precondition on a caller-supplied value
  out_of_bounds,
  shape_mismatch,
  no_marker_pixels,
  degenerate_input,   // e.g. zero channel-mean sum during factorization
  insufficient_samples,
  io,
  bad_magic,
  unsupported_version,
  truncated_blob,
  malformed_header,
  invariant_violation,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace flim
