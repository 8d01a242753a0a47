#pragma once

#include <stdexcept>
#include <string>

namespace bodymap {

/// Malformed input file. Derives from invalid_argument: bad input, not a
/// failure of the computation.
struct FormatError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A density or factorization that cannot be evaluated.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// EM failed on every restart.
struct FitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace bodymap
