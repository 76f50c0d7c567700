#ifndef PACVERIFY_ERROR_HPP
#define PACVERIFY_ERROR_HPP

#include <stdexcept>
#include <string>

namespace pacverify {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Vector/matrix sizes that do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Malformed model file; the message carries the offending field.
class ModelFormatError : public Error {
 public:
  using Error::Error;
};

// External oracle failed: spawn, I/O, or a reply that breaks the protocol.
class OracleError : public Error {
 public:
  using Error::Error;
};

// A numeric parameter outside the operation's domain.
class ParameterError : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

}  // namespace pacverify

#endif  // PACVERIFY_ERROR_HPP
