#pragma once

#include "circa/json.hpp"
#include "circa/segmentation/trisection.hpp"

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace circa::radiomics {

enum class Family { FirstOrder, Glcm, Glrlm, Glszm, Ngtdm };

inline constexpr std::array<Family, 5> kFamilies{Family::FirstOrder, Family::Glcm, Family::Glrlm, Family::Glszm,
                                                 Family::Ngtdm};

/// "first_order", "glcm", "glrlm", "glszm", "ngtdm".
std::string_view family_tag(Family family);

/// Feature names of one family in canonical order. The ngtdm block holds the
/// five neighbourhood tone-difference features followed by seven
/// neighbouring-dependence features.
std::span<const std::string_view> family_features(Family family);

inline constexpr std::size_t kFeaturesPerSegment = 87;
inline constexpr std::size_t kCatalogSize = 3 * kFeaturesPerSegment;

struct FeatureDescriptor {
    segmentation::LungSegment segment;
    Family family;
    std::string name;

    /// e.g. "UL_glcm_Contrast"
    std::string full_name() const;
};

class FeatureCatalog {
public:
    /// The built-in 261-feature catalog (segments UL, ML, LL; families in kFamilies order).
    static const FeatureCatalog& standard();

    std::size_t size() const noexcept { return descriptors_.size(); }
    const FeatureDescriptor& operator[](std::size_t i) const { return descriptors_[i]; }
    std::span<const FeatureDescriptor> descriptors() const noexcept { return descriptors_; }
    const std::vector<std::string>& names() const noexcept { return names_; }
    std::optional<std::size_t> index_of(std::string_view full_name) const;

    /// {"version", "features": [{"index","segment","family","name"}...], "sha256"}
    /// where sha256 covers the canonical dump of the features array.
    Json to_json() const;

    /// Parses a catalog file and verifies its checksum (CorruptModel on mismatch).
    static FeatureCatalog from_json(const Json& doc);

private:
    std::vector<FeatureDescriptor> descriptors_;
    std::vector<std::string> names_;
};

}  // namespace circa::radiomics
