#pragma once

#include <ostream>

#include "dlqr/errors.hpp"

namespace dlqr::cli {

enum ExitCode : int {
  kOk = 0,
  kInputError = 1,
  kIoError = 2,
  kUnstable = 3,
  kInfeasible = 4,
  kBadGain = 5,
};

class IoError : public Error {
 public:
  using Error::Error;
};

// The initial gain for sPI is unusable (wrong shape or not stabilizing).
class BadGainError : public Error {
 public:
  using Error::Error;
};

/// Entry point behind the `dlqr` executable. Never throws; every failure is
/// reported on `err` and mapped to an exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dlqr::cli
