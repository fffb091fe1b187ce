#pragma once

#include <stdexcept>
#include <string>

namespace tilted {

// Non-finite inputs, failed decompositions, diverged losses.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape, dimension, or count mismatches between arguments.
class StructuralError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Bad user input: unreadable files, unknown config keys, out-of-range options.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tilted
