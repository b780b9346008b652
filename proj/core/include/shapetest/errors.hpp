#pragma once

#include <stdexcept>
#include <string>

namespace shapetest {

// Bad configuration: wrong degree, empty knot range, malformed shape token...
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input data problems: non-finite values, x outside the domain, too few points.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The constraint set admits no coefficient vector.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An iterative solver gave up, or a linear system turned out inconsistent.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace shapetest
