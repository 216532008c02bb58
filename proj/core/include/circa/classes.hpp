#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace circa {

enum class ClassLabel { Normal = 0, Pneumonia = 1, Covid = 2 };

inline constexpr std::array<ClassLabel, 3> kAllClasses{ClassLabel::Normal, ClassLabel::Pneumonia,
                                                       ClassLabel::Covid};

std::string_view to_string(ClassLabel label);
std::optional<ClassLabel> parse_class_label(std::string_view text);

/// One-letter subtype prefix: N, P or C.
char subtype_prefix(ClassLabel label);

inline int index_of(ClassLabel label) { return static_cast<int>(label); }
inline ClassLabel class_from_index(int index) { return static_cast<ClassLabel>(index); }

/// Three-class probability simplex (normal, pneumonia, covid).
struct ClassProbabilities {
    std::array<double, 3> p{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};

    double operator[](ClassLabel c) const { return p[static_cast<std::size_t>(c)]; }
    double normal() const { return p[0]; }
    double pneumonia() const { return p[1]; }
    double covid() const { return p[2]; }

    /// Each in [0,1] and sum within 1e-6 of one.
    bool valid() const;
};

}  // namespace circa
