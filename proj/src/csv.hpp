// Internal CSV number formatting shared by the exporters.
#pragma once

#include <charconv>
#include <string>

namespace gridres::csv {

// Shortest round-trip representation; locale independent.
inline std::string num(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, end);
}

}  // namespace gridres::csv
