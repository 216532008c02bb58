#include "circa/json.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace circa {
namespace {

void format_double(double v, std::string& out) {
    if (!std::isfinite(v)) {
        out += "null";
        return;
    }
    if (v == 0.0) v = 0.0;  // drops the sign of -0
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    if (std::string_view(buf) == "-0") {
        out += "0";
        return;
    }
    out += buf;
}

void dump_into(const Json& value, std::string& out) {
    switch (value.type()) {
        case Json::value_t::object: {
            out += '{';
            bool first = true;
            for (auto it = value.begin(); it != value.end(); ++it) {
                if (!first) out += ',';
                first = false;
                out += Json(it.key()).dump();
                out += ':';
                dump_into(it.value(), out);
            }
            out += '}';
            break;
        }
        case Json::value_t::array: {
            out += '[';
            bool first = true;
            for (const auto& item : value) {
                if (!first) out += ',';
                first = false;
                dump_into(item, out);
            }
            out += ']';
            break;
        }
        case Json::value_t::number_float: format_double(value.get<double>(), out); break;
        default: out += value.dump(); break;
    }
}

}  // namespace

std::string canonical_dump(const Json& value) {
    std::string out;
    dump_into(value, out);
    return out;
}

double canonical_round(double value) {
    if (!std::isfinite(value)) return value;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", value);
    return std::strtod(buf, nullptr);
}

}  // namespace circa
