#ifndef KBLAB_ERRORS_HPP
#define KBLAB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace kblab {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Operands have incompatible dimensions.
class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what) : Error(what) {}
};

/// Invalid argument values (non-PSD input, bad parameter range, ...).
class InvalidInputError : public Error {
 public:
  explicit InvalidInputError(const std::string& what) : Error(what) {}
};

/// Numerical failure: solver breakdown, singular system, non-convergence.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(what) {}
};

/// A trajectory left the admissible region (non-finite entries or norm
/// above the blow-up threshold). Carries the time of failure.
class BlowUpError : public NumericalError {
 public:
  BlowUpError(const std::string& what, double t)
      : NumericalError(what + " at t = " + std::to_string(t)), time(t) {}
  double time;
};

/// Config file / experiment description problems. CLI maps this to exit 2.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

}  // namespace kblab

#endif  // KBLAB_ERRORS_HPP
