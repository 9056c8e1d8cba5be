#pragma once

#include <stdexcept>
#include <string>

namespace meraugcn {

// Every error carries the process exit code the CLI reports for it.
class Error : public std::runtime_error {
public:
  Error(const std::string& what, int exit_code)
      : std::runtime_error(what), exit_code_(exit_code) {}
  int exit_code() const noexcept { return exit_code_; }

private:
  int exit_code_;
};

class ValidationError : public Error {
public:
  explicit ValidationError(const std::string& what) : Error(what, 1) {}
};

/// Violated caller contract (bad argument, out-of-range id, wrong rank).
class ContractError : public ValidationError {
public:
  explicit ContractError(const std::string& what) : ValidationError(what) {}
};

class ShapeError : public ValidationError {
public:
  explicit ShapeError(const std::string& what) : ValidationError(what) {}
};

class ParseError : public ValidationError {
public:
  ParseError(const std::string& what, std::size_t line)
      : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

class ProtocolError : public ValidationError {
public:
  explicit ProtocolError(const std::string& what) : ValidationError(what) {}
};

class NumericError : public Error {
public:
  explicit NumericError(const std::string& what) : Error(what, 2) {}
};

class IoError : public Error {
public:
  explicit IoError(const std::string& what) : Error(what, 3) {}
};

class FormatError : public IoError {
public:
  explicit FormatError(const std::string& what) : IoError(what) {}
};

}  // namespace meraugcn
