#pragma once

#include <stdexcept>
#include <string>

namespace safeplan {

// Exit codes used by the command-line driver.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitCapExceeded = 3;
inline constexpr int kExitNumeric = 4;

/// Malformed input: bad scenario fields, out-of-bounds cells, inadmissible actions.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An exhaustive routine was asked to enumerate more than its configured cap.
class CapExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An internal invariant tripwire fired (probability out of range, bookkeeping drift).
class NumericViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Curvature of one or submodularity ratio of zero: the guarantee carries no information.
class VacuousBound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace safeplan
