#include "gazespiral/common.hpp"

#include <cctype>
#include <cstdio>

#ifndef GAZESPIRAL_VERSION
#define GAZESPIRAL_VERSION "0.0.0"
#endif

namespace gazespiral {

namespace {
int hex_digit(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;
}
}  // namespace

Rgb parse_hex_color(const std::string& hex) {
  if (hex.size() != 7 || hex[0] != '#') throw ParseError("bad color '" + hex + "', expected #rrggbb");
  std::uint8_t v[3];
  for (int i = 0; i < 3; ++i) {
    const int hi = hex_digit(hex[1 + 2 * i]);
    const int lo = hex_digit(hex[2 + 2 * i]);
    if (hi < 0 || lo < 0) throw ParseError("bad color '" + hex + "', expected #rrggbb");
    v[i] = static_cast<std::uint8_t>(hi * 16 + lo);
  }
  return {v[0], v[1], v[2]};
}

std::string to_hex_color(Rgb c) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
  return buf;
}

const char* version_string() { return "gazespiral " GAZESPIRAL_VERSION; }

}  // namespace gazespiral
