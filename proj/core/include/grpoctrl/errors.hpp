#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace grpoctrl {

enum class ErrorCode {
  kInvalidArgument,
  kDimensionMismatch,
  kNonPositiveRadius,
  kNonPositiveMass,
  kNumericalBlowup,
  kStepSizeUnderflow,
  kSolverFailed,
  kNonDecreasingLoss,
  kRatioOverflow,
  kBridgeDisconnected,
  kBridgeTimeout,
  kIo,
};

std::string_view to_string(ErrorCode code);

/// Base exception for every failure surfaced by the library. The code is
/// stable and is what the CLI maps onto exit statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace grpoctrl
