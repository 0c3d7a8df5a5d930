#pragma once

#include <sstream>
#include <string>
#include <type_traits>

#include "digirl/core/error.hpp"

namespace digirl::core {

/// Parses one config value into `out`; throws ConfigError naming `key`.
template <typename T>
void parse_field(const std::string& key, const std::string& value, T& out) {
  if constexpr (std::is_same_v<T, bool>) {
    if (value == "true" || value == "1" || value == "on") {
      out = true;
    } else if (value == "false" || value == "0" || value == "off") {
      out = false;
    } else {
      throw ConfigError("field '" + key + "': expected a boolean, got '" + value + "'");
    }
  } else {
    std::istringstream is(value);
    T parsed{};
    is >> parsed;
    if (is.fail() || !is.eof()) throw ConfigError("field '" + key + "': cannot parse '" + value + "'");
    out = parsed;
  }
}

template <typename T>
std::string format_field(const T& v) {
  std::ostringstream os;
  if constexpr (std::is_same_v<T, bool>) {
    os << (v ? "true" : "false");
  } else {
    os.precision(17);
    os << v;
  }
  return os.str();
}

}  // namespace digirl::core
