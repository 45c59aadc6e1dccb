#pragma once

#include <stdexcept>

namespace robustfl {

// Raised when a configuration or structural precondition is violated:
// mismatched dimensions, invalid aggregation parameters, unknown config keys.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when runtime data is unusable: labels out of range, empty model
// lists, too few examples to partition.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace robustfl
