#pragma once

#include <nlohmann/json.hpp>

#include <string>

namespace circa {

using Json = nlohmann::json;

/// Canonical serialization: sorted keys, no whitespace, floating-point values
/// printed with 9 significant digits, -0 printed as 0, non-finite as null.
std::string canonical_dump(const Json& value);

/// Rounds a double to the value its canonical text would parse back to.
double canonical_round(double value);

}  // namespace circa
