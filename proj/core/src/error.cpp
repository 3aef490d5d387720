#include "flim/error.hpp"

namespace flim {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid argument";
    case ErrorCode::out_of_bounds: return "out of bounds";
    case ErrorCode::shape_mismatch: return "shape mismatch";
    case ErrorCode::no_marker_pixels: return "no marker pixels";
    case ErrorCode::degenerate_input: return "degenerate input";
    case ErrorCode::insufficient_samples: return "insufficient samples";
    case ErrorCode::io: return "i/o error";
    case ErrorCode::bad_magic: return "bad magic";
    case ErrorCode::unsupported_version: return "unsupported version";
    case ErrorCode::truncated_blob: return "truncated blob";
    case ErrorCode::malformed_header: return "malformed header";
    case ErrorCode::invariant_violation: return "invariant violation";
  }
  return "unknown";
}

}  // namespace flim
