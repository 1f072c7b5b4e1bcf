#pragma once

#include <stdexcept>
#include <string>

namespace instasent {

// Bad caller-supplied value (n < 1, empty corpus, out-of-range coordinate).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Inconsistent shapes or configuration; not recoverable by retrying.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Media that exists on disk but cannot be decoded.
class CorruptMediaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training produced a NaN/Inf loss.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace instasent
