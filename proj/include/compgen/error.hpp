#pragma once

#include <stdexcept>
#include <string>

namespace compgen {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed arguments: dimension mismatch, out-of-range level, bad state.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration values (schedules, sampler configs, run configs).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A composed energy that cannot define a normalizable density.
class ConstructionError : public Error {
 public:
  using Error::Error;
};

/// A Markov chain produced a non-finite state, energy or gradient.
class ChainError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss or parameter.
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace compgen
