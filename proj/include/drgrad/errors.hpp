#ifndef DRGRAD_ERRORS_HPP
#define DRGRAD_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace drgrad {

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct EmptyInputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Non-finite value produced during optimization; carries the iteration.
struct NumericError : std::runtime_error {
  long iteration;
  NumericError(const std::string& what, long t)
      : std::runtime_error(what + " (iteration " + std::to_string(t) + ")"),
        iteration(t) {}
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct StateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SizeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PreconditionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace drgrad

#endif  // DRGRAD_ERRORS_HPP
