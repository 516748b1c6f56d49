#pragma once

#include <stdexcept>
#include <string>

namespace mts {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input structure: cycles, orphans, nonpositive weights, bad metrics.
class StructureError : public Error {
 public:
  using Error::Error;
};

// A precondition on a numeric argument does not hold (tau <= 3, negative cost, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace mts
