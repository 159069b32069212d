#pragma once

#include <stdexcept>
#include <string>

namespace rsr {

// Base for every failure raised by the library. The CLI maps these to exit
// code 2 (data/model error); UsageError maps to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace rsr
