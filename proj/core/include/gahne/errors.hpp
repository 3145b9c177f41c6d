#pragma once

#include <stdexcept>
#include <string>

namespace gahne {

// Invalid configuration or API misuse (bad shapes, bad option values).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent user data (files, ids, dimension mismatches
// between artifacts).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values where finite ones are required.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gahne
