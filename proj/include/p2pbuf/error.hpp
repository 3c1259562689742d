#pragma once

#include <stdexcept>
#include <string>

namespace p2pbuf {

// Base for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A precondition on an argument does not hold.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// threshold_below was asked for the maximum of an empty index set.
class EmptySet : public Error {
 public:
  using Error::Error;
};

// An iterative solver stopped before meeting its tolerance.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

// No buffer size up to the search ceiling reaches the target.
class UnreachableTarget : public Error {
 public:
  using Error::Error;
};

}  // namespace p2pbuf
