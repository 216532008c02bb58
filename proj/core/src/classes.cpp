#include "circa/classes.hpp"

#include <cmath>

namespace circa {

std::string_view to_string(ClassLabel label) {
    switch (label) {
        case ClassLabel::Normal: return "normal";
        case ClassLabel::Pneumonia: return "pneumonia";
        case ClassLabel::Covid: return "covid";
    }
    return "normal";
}

std::optional<ClassLabel> parse_class_label(std::string_view text) {
    if (text == "normal") return ClassLabel::Normal;
    if (text == "pneumonia") return ClassLabel::Pneumonia;
    if (text == "covid") return ClassLabel::Covid;
    return std::nullopt;
}

char subtype_prefix(ClassLabel label) {
    switch (label) {
        case ClassLabel::Normal: return 'N';
        case ClassLabel::Pneumonia: return 'P';
        case ClassLabel::Covid: return 'C';
    }
    return 'N';
}

bool ClassProbabilities::valid() const {
    double sum = 0.0;
    for (double v : p) {
        if (!(v >= 0.0 && v <= 1.0)) return false;
        sum += v;
    }
    return std::abs(sum - 1.0) <= 1e-6;
}

}  // namespace circa
