#pragma once

#include <stdexcept>
#include <string>

namespace ecpipe {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed text input (FASTA, TSV, JSON). Carries a 1-based line number
/// when one is known; line == 0 means "no specific line".
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Semantically invalid data: mismatched ids, unresolvable labels,
/// infeasible parameters.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Corrupt or unrecognized binary container.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure: NaN loss, failed gradient check.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace ecpipe
