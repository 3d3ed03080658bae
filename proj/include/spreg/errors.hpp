#pragma once

#include <stdexcept>
#include <string>

namespace spreg {

// Every error carries a short machine-readable code; the wire protocol echoes
// it verbatim in `error{code, message}` responses.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class InvalidInput : public Error {
 public:
  explicit InvalidInput(const std::string& message) : Error("invalid_input", message) {}
};

class NotReady : public Error {
 public:
  explicit NotReady(const std::string& message) : Error("not_ready", message) {}
};

class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& message, std::string code = "protocol")
      : Error(std::move(code), message) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error("config", message) {}
};

/// Malformed trace/event/scenario data. `line` is 1-based, 0 when unknown.
class FormatError : public Error {
 public:
  FormatError(const std::string& message, std::size_t line = 0);

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace spreg
