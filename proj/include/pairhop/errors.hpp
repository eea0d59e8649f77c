#pragma once

#include <stdexcept>
#include <string>

namespace pairhop {

// Every library failure derives from Error so callers (the CLI in particular)
// can record a per-point message without aborting a whole sweep.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CapacityError : public Error {
 public:
  using Error::Error;
};

class DegenerateCatError : public Error {
 public:
  DegenerateCatError() : Error("odd cat state with alpha = 0 has zero norm") {}
};

class EmptySectorError : public Error {
 public:
  using Error::Error;
};

class InstabilityError : public Error {
 public:
  using Error::Error;
};

class StiffnessError : public Error {
 public:
  using Error::Error;
};

class DegeneratePotentialError : public Error {
 public:
  using Error::Error;
};

class BelowThresholdError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace pairhop
