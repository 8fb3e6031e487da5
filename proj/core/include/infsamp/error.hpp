#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace infsamp {

enum class ErrorKind { config, data, parse, capacity, integrity, io };

std::string_view to_string(ErrorKind kind);

/// Base of every exception thrown by the library. `kind()` drives the
/// machine-parsable prefix the CLI prints (`error: <kind>: <message>`).
class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

class ConfigError : public Error {
public:
  explicit ConfigError(const std::string& message) : Error(ErrorKind::config, message) {}
};

class DataError : public Error {
public:
  explicit DataError(const std::string& message) : Error(ErrorKind::data, message) {}
};

class ParseError : public Error {
public:
  ParseError(std::size_t line, const std::string& message)
      : Error(ErrorKind::parse, "line " + std::to_string(line) + ": " + message), line_(line) {}

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

class CapacityError : public Error {
public:
  explicit CapacityError(const std::string& message) : Error(ErrorKind::capacity, message) {}
};

class IntegrityError : public Error {
public:
  explicit IntegrityError(const std::string& message) : Error(ErrorKind::integrity, message) {}
};

class IoError : public Error {
public:
  explicit IoError(const std::string& message) : Error(ErrorKind::io, message) {}
};

}  // namespace infsamp
