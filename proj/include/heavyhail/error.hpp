#pragma once

#include <stdexcept>
#include <string>

namespace heavyhail {

// Malformed input, missing file, bad flag. CLI exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A modelling assumption does not hold for the given data. CLI exit code 2.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A numerical routine failed to converge or lost accuracy. CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the domain of a primitive (e.g. a price above the choke price).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace heavyhail
