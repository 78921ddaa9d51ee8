#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace gazespiral {

/// Raised when a caller violates an operation's preconditions.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed input file. `line()` is 1-based, 0 when not tied to a line.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Recording could not be opened or is inconsistent with its manifest.
class IngestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data that is well-formed but unusable (e.g. empty recording, zero variance).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

namespace colors {
inline constexpr Rgb kBlack{0, 0, 0};
inline constexpr Rgb kWhite{255, 255, 255};
inline constexpr Rgb kRed{255, 0, 0};
inline constexpr Rgb kYellow{255, 221, 0};
}  // namespace colors

/// "#rrggbb" (case-insensitive) to Rgb. Throws ParseError on anything else.
Rgb parse_hex_color(const std::string& hex);
std::string to_hex_color(Rgb c);

const char* version_string();

}  // namespace gazespiral
