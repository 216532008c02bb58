#include "circa/version.hpp"

namespace circa {

std::string_view version() noexcept { return CIRCA_VERSION; }

}  // namespace circa
