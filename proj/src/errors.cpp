#include "spreg/errors.hpp"

namespace spreg {

namespace {

std::string with_line(const std::string& message, std::size_t line) {
  if (line == 0) return message;
  return "line " + std::to_string(line) + ": " + message;
}

}  // namespace

FormatError::FormatError(const std::string& message, std::size_t line)
    : Error("format", with_line(message, line)), line_(line) {}

}  // namespace spreg
