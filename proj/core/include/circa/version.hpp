#pragma once

#include <string_view>

namespace circa {

std::string_view version() noexcept;

}  // namespace circa
