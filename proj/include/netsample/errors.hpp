#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace netsample {

/// Caller broke a precondition (bad index, mismatched dimensions, malformed input).
class UsageError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Bad experiment configuration. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Exhaustive solver refused an instance above its enumeration cap. Exit code 3.
class SolverSizeError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Filter hit a non-positive-definite innovation matrix. Exit code 4.
class NumericalError : public std::runtime_error {
  public:
    NumericalError(const std::string& what, std::size_t time_index)
        : std::runtime_error(what + " (t=" + std::to_string(time_index) + ")"), time_index_(time_index) {}

    std::size_t time_index() const noexcept { return time_index_; }

  private:
    std::size_t time_index_;
};

/// A link estimate was requested for a link that is not sampled (u = 0).
class NoEstimateError : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

/// No sampled link is available to combine.
class NoObservationError : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

}  // namespace netsample
