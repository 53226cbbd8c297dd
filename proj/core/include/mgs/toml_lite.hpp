#pragma once

#include <string>

#include <json.hpp>

namespace mgs {

// Reads the TOML subset used by run configs into JSON: [section] and
// [dotted.section] headers, key = value pairs, strings, booleans, numbers,
// and (nested) arrays, with # comments. Throws ConfigError with a line number.
nlohmann::json parse_toml_lite(const std::string& text);

}  // namespace mgs
