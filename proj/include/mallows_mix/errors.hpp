#pragma once

#include <stdexcept>
#include <string>

namespace mallows_mix {

// Invalid argument relative to an operation's domain (bad permutation, phi out of range, ...).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Request exceeds a deliberate size guard, e.g. enumeration beyond n = 8.
struct CapacityError : std::length_error {
  using std::length_error::length_error;
};

// Inconsistent or insufficient learner / experiment configuration.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A statistic could not be estimated from the available data.
struct EstimationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mallows_mix
