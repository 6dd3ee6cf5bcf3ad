#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace asmu {

enum class ErrorCode {
  invalid_argument,
  invalid_input,
  invalid_patch,
  frame_mismatch,
  too_large_for_oracle,
  missing_patch,
  uninitialized_surrogate,
  unrankable_dataset,
  invalid_score,
  shape,
  invalid_loss,
  invalid_experiment,
  io,
  parse,
  invalid_config,
};

inline std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::invalid_input: return "invalid-input";
    case ErrorCode::invalid_patch: return "invalid-patch";
    case ErrorCode::frame_mismatch: return "frame-mismatch";
    case ErrorCode::too_large_for_oracle: return "too-large-for-oracle";
    case ErrorCode::missing_patch: return "missing-patch";
    case ErrorCode::uninitialized_surrogate: return "uninitialized-surrogate";
    case ErrorCode::unrankable_dataset: return "unrankable-dataset";
    case ErrorCode::invalid_score: return "invalid-score";
    case ErrorCode::shape: return "shape";
    case ErrorCode::invalid_loss: return "invalid-loss";
    case ErrorCode::invalid_experiment: return "invalid-experiment";
    case ErrorCode::io: return "io";
    case ErrorCode::parse: return "parse";
    case ErrorCode::invalid_config: return "invalid-config";
  }
  return "unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace asmu
