#pragma once

#include <stdexcept>
#include <string>

namespace vrf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A model input (profile, rate set, thresholds, traffic, config file) is invalid.
class InvalidConfiguration : public Error {
 public:
  using Error::Error;
};

/// An argument to a numerical routine is outside its admissible range.
class InvalidParameter : public Error {
 public:
  using Error::Error;
};

/// The chain does not have the structure a solver needs (reducible, closed class in R).
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// Fold-back construction requested on a partition whose returns are not unique.
class TheoremInapplicable : public Error {
 public:
  using Error::Error;
};

/// The state space would exceed the configured enumeration cap.
class CapacityError : public Error {
 public:
  using Error::Error;
};

}  // namespace vrf
