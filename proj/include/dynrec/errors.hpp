#pragma once

#include <stdexcept>
#include <string>

namespace dynrec {

// Base class for failures that carry modelling meaning (as opposed to plain
// precondition violations, which throw std::invalid_argument / out_of_range).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An age segment with zero slope has no inverse map.
class DegenerateAgeError : public Error {
 public:
  using Error::Error;
};

// S0 vanished where a positive value is required.
class EmptyRiskSetError : public Error {
 public:
  using Error::Error;
};

// The simulated counting process hit the per-unit event cap.
class ExplosionError : public Error {
 public:
  using Error::Error;
};

class SingularMatrixError : public Error {
 public:
  using Error::Error;
};

// The modulation kappa does not depend on eta, so eta is not identified.
class DegenerateEtaError : public Error {
 public:
  using Error::Error;
};

}  // namespace dynrec
