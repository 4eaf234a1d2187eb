// Exception types shared by all mcflow modules.

#ifndef MCFLOW_ERRORS_HPP_
#define MCFLOW_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace mcflow {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidLattice : Error { using Error::Error; };
struct ReductionFailure : Error { using Error::Error; };
struct InconsistentSymmetry : Error { using Error::Error; };
struct UnsupportedElement : Error { using Error::Error; };
struct InvalidData : Error { using Error::Error; };
struct SequenceLength : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct UsageError : Error { using Error::Error; };

// Raised when a forward/backward pass produces a non-finite value.
struct NumericFailure : Error {
  NumericFailure(const std::string& what, int layer)
    : Error(what + " (layer " + std::to_string(layer) + ")"), layer(layer) {}
  int layer;
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

} // namespace mcflow
#endif
