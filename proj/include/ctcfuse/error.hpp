#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ctcfuse {

// Base for every error raised by the toolkit. The CLI maps these to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A file or stream does not follow its declared format.
class FormatError : public Error {
 public:
  using Error::Error;
};

// A text format error tied to a line of input (1-based).
class ParseError : public FormatError {
 public:
  ParseError(std::size_t line, const std::string &what)
      : FormatError("line " + std::to_string(line) + ": " + what), line_(line), detail_(what) {}
  std::size_t line() const { return line_; }
  // The message without the line prefix.
  const std::string &detail() const { return detail_; }

 private:
  std::size_t line_;
  std::string detail_;
};

// Arguments that violate an operation's preconditions.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace ctcfuse
