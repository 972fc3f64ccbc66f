#pragma once

#include <stdexcept>
#include <string>

namespace mslt {

// Root of every error the library throws. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Channel or spatial shapes disagree between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Input is too small for the requested operation (pyramid depth, SSIM window, ...).
class SizeError : public Error {
 public:
  using Error::Error;
};

// A documented precondition was violated (guidance out of range, stale trace, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

// File could not be opened, read, decoded or written.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace mslt
