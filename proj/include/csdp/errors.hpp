#ifndef CSDP_ERRORS_HPP
#define CSDP_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace csdp {

// Invalid caller-supplied arguments (bad epsilon/delta, out-of-range n or k, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  explicit InvalidArgument(const std::string& what) : std::invalid_argument(what) {}
};

// Runtime lifecycle misuse: double activation, submit to an inactive or full
// slot, executing out of order.
class ProtocolViolation : public std::logic_error {
 public:
  explicit ProtocolViolation(const std::string& what) : std::logic_error(what) {}
};

// A schedule demands more concurrent shuffler slots than the runtime has.
class CapacityExceeded : public std::logic_error {
 public:
  explicit CapacityExceeded(const std::string& what) : std::logic_error(what) {}
};

// Decoding impossible: the debias denominator vanished (blanket rate = 1).
class EstimatorUndefined : public std::runtime_error {
 public:
  explicit EstimatorUndefined(const std::string& what) : std::runtime_error(what) {}
};

// A serialized transcript failed to parse or has inconsistent fields.
class MalformedTranscript : public std::runtime_error {
 public:
  explicit MalformedTranscript(const std::string& what) : std::runtime_error(what) {}
};

// Linear-algebra breakdown (non-finite values, singular solve).
class NumericalFailure : public std::runtime_error {
 public:
  explicit NumericalFailure(const std::string& what) : std::runtime_error(what) {}
};

// Sweep configuration file missing keys, empty grids, or bad values.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Scaling fit requested on degenerate data (too few points, constant values).
class FitUndefined : public std::runtime_error {
 public:
  explicit FitUndefined(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace csdp

#endif  // CSDP_ERRORS_HPP
