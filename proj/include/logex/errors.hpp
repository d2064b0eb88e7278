#pragma once

#include <stdexcept>
#include <string>

namespace logex {

// Base of every error raised by the library. The CLI maps each subclass onto
// a process exit code (see ExitCodeFor in cli.hpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input: bad numbers, rewards outside [0,1], truncated lines.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Invalid parameter such as tau <= 0 or an empty learning-rate list.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Estimation requested on data that cannot support it (empty dataset).
class EstimationError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// SGD produced a non-finite weight, or no candidate survived a sweep.
class TrainingError : public Error {
 public:
  using Error::Error;
};

// A policy was asked to act without any candidate action.
class PolicyError : public Error {
 public:
  using Error::Error;
};

// Brute-force enumeration would exceed its term budget.
class CapacityError : public Error {
 public:
  using Error::Error;
};

// Bad command-line usage that survives flag parsing (e.g. missing split marker).
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace logex
