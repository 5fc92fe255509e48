#pragma once

#include <charconv>
#include <string>

namespace crowdclip::internal {

// Shortest representation that round-trips, in plain decimal notation when
// that stays short ("0.0001" rather than "1e-04").
inline std::string FormatDouble(double value) {
  char buffer[400];
  auto fixed = std::to_chars(buffer, buffer + sizeof(buffer), value,
                             std::chars_format::fixed);
  if (fixed.ec == std::errc() && fixed.ptr - buffer <= 16) {
    return std::string(buffer, fixed.ptr);
  }
  auto general = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, general.ptr);
}

inline std::string FormatBool(bool value) { return value ? "true" : "false"; }

}  // namespace crowdclip::internal
