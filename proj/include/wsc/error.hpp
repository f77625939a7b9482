#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace wsc {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Input files missing or unreadable.
struct IngestionError : Error {
  using Error::Error;
};

// Malformed input content; carries the 1-based line number when known.
struct FormatError : Error {
  FormatError(const std::string& msg, long line = -1)
      : Error(line > 0 ? msg + " (line " + std::to_string(line) + ")" : msg),
        line_number(line) {}
  long line_number;
};

// Invalid configuration (flags, modes, architecture strings).
struct ConfigError : Error {
  using Error::Error;
};

// Mathematical precondition violated (bad weights, out-of-range index).
struct DomainError : Error {
  using Error::Error;
};

// API misuse (missing forward cache, mismatched shapes between calls).
struct UsageError : Error {
  using Error::Error;
};

// Non-finite values where finiteness is required.
struct NumericError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

namespace detail {
template <typename... Args>
std::string format_msg(Args&&... args) {
  std::ostringstream oss;
  (oss << ... << args);
  return oss.str();
}
}  // namespace detail

}  // namespace wsc

#define WSC_REQUIRE(cond, ExcType, ...)                                \
  do {                                                                 \
    if (!(cond)) throw ExcType(::wsc::detail::format_msg(__VA_ARGS__)); \
  } while (0)
