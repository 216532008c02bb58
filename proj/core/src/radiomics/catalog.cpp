#include "circa/radiomics/catalog.hpp"

#include "circa/checksum.hpp"
#include "circa/error.hpp"

#include <algorithm>

namespace circa::radiomics {
namespace {

constexpr std::string_view kFirstOrder[] = {
    "Energy", "TotalEnergy", "Entropy", "Minimum", "10Percentile", "90Percentile", "Maximum",
    "Mean", "Median", "InterquartileRange", "Range", "MeanAbsoluteDeviation", "RobustMeanAbsoluteDeviation",
    "RootMeanSquared", "StandardDeviation", "Skewness", "Kurtosis", "Variance", "Uniformity"};

constexpr std::string_view kGlcm[] = {
    "Autocorrelation", "JointAverage", "ClusterProminence", "ClusterShade", "ClusterTendency", "Contrast",
    "Correlation", "DifferenceAverage", "DifferenceEntropy", "DifferenceVariance", "JointEnergy", "JointEntropy",
    "Imc1", "Imc2", "Idm", "Idmn", "Id", "Idn", "InverseVariance", "MaximumProbability", "SumAverage",
    "SumEntropy", "SumSquares", "MCC"};

constexpr std::string_view kGlrlm[] = {
    "ShortRunEmphasis", "LongRunEmphasis", "GrayLevelNonUniformity", "GrayLevelNonUniformityNormalized",
    "RunLengthNonUniformity", "RunLengthNonUniformityNormalized", "RunPercentage", "GrayLevelVariance",
    "RunVariance", "RunEntropy", "LowGrayLevelRunEmphasis", "HighGrayLevelRunEmphasis",
    "ShortRunLowGrayLevelEmphasis", "ShortRunHighGrayLevelEmphasis", "LongRunLowGrayLevelEmphasis",
    "LongRunHighGrayLevelEmphasis"};

constexpr std::string_view kGlszm[] = {
    "SmallAreaEmphasis", "LargeAreaEmphasis", "GrayLevelNonUniformity", "GrayLevelNonUniformityNormalized",
    "SizeZoneNonUniformity", "SizeZoneNonUniformityNormalized", "ZonePercentage", "GrayLevelVariance",
    "ZoneVariance", "ZoneEntropy", "LowGrayLevelZoneEmphasis", "HighGrayLevelZoneEmphasis",
    "SmallAreaLowGrayLevelEmphasis", "SmallAreaHighGrayLevelEmphasis", "LargeAreaLowGrayLevelEmphasis",
    "LargeAreaHighGrayLevelEmphasis"};

constexpr std::string_view kNgtdm[] = {
    "Coarseness", "Contrast", "Busyness", "Complexity", "Strength",
    "SmallDependenceEmphasis", "LargeDependenceEmphasis", "DependenceGrayLevelNonUniformity",
    "DependenceNonUniformity", "DependenceNonUniformityNormalized", "DependenceGrayLevelVariance",
    "DependenceVariance"};

static_assert(std::size(kFirstOrder) + std::size(kGlcm) + std::size(kGlrlm) + std::size(kGlszm) +
                  std::size(kNgtdm) == kFeaturesPerSegment);

constexpr int kCatalogVersion = 1;

Json features_json(std::span<const FeatureDescriptor> ds) {
    Json arr = Json::array();
    for (std::size_t i = 0; i < ds.size(); ++i) {
        arr.push_back(Json{{"index", i},
                           {"segment", segmentation::segment_tag(ds[i].segment)},
                           {"family", std::string(family_tag(ds[i].family))},
                           {"name", ds[i].name}});
    }
    return arr;
}

}  // namespace

std::string_view family_tag(Family family) {
    switch (family) {
        case Family::FirstOrder: return "first_order";
        case Family::Glcm: return "glcm";
        case Family::Glrlm: return "glrlm";
        case Family::Glszm: return "glszm";
        case Family::Ngtdm: return "ngtdm";
    }
    return "first_order";
}

std::span<const std::string_view> family_features(Family family) {
    switch (family) {
        case Family::FirstOrder: return kFirstOrder;
        case Family::Glcm: return kGlcm;
        case Family::Glrlm: return kGlrlm;
        case Family::Glszm: return kGlszm;
        case Family::Ngtdm: return kNgtdm;
    }
    return {};
}

std::string FeatureDescriptor::full_name() const {
    return std::string(segmentation::segment_tag(segment)) + "_" + std::string(family_tag(family)) + "_" + name;
}

const FeatureCatalog& FeatureCatalog::standard() {
    static const FeatureCatalog catalog = [] {
        FeatureCatalog c;
        for (auto seg : segmentation::kSegments) {
            for (auto fam : kFamilies) {
                for (auto name : family_features(fam)) {
                    c.descriptors_.push_back(FeatureDescriptor{seg, fam, std::string(name)});
                    c.names_.push_back(c.descriptors_.back().full_name());
                }
            }
        }
        return c;
    }();
    return catalog;
}

std::optional<std::size_t> FeatureCatalog::index_of(std::string_view full_name) const {
    const auto it = std::find(names_.begin(), names_.end(), full_name);
    if (it == names_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - names_.begin());
}

Json FeatureCatalog::to_json() const {
    Json features = features_json(descriptors_);
    return Json{{"version", kCatalogVersion},
                {"dimension", descriptors_.size()},
                {"features", features},
                {"sha256", sha256_hex(canonical_dump(features))}};
}

FeatureCatalog FeatureCatalog::from_json(const Json& doc) {
    const Json& features = doc.at("features");
    if (sha256_hex(canonical_dump(features)) != doc.at("sha256").get<std::string>()) {
        throw Error(ErrorCode::CorruptModel, "feature catalog checksum mismatch");
    }
    FeatureCatalog c;
    for (const auto& f : features) {
        const auto seg_tag = f.at("segment").get<std::string>();
        const auto fam_tag = f.at("family").get<std::string>();
        FeatureDescriptor d{segmentation::LungSegment::Upper, Family::FirstOrder, f.at("name").get<std::string>()};
        bool seg_ok = false;
        for (auto s : segmentation::kSegments) {
            if (seg_tag == segmentation::segment_tag(s)) {
                d.segment = s;
                seg_ok = true;
            }
        }
        bool fam_ok = false;
        for (auto fam : kFamilies) {
            if (fam_tag == family_tag(fam)) {
                d.family = fam;
                fam_ok = true;
            }
        }
        if (!seg_ok || !fam_ok) throw Error(ErrorCode::CorruptModel, "unknown segment or family in catalog");
        c.descriptors_.push_back(d);
        c.names_.push_back(d.full_name());
    }
    return c;
}

}  // namespace circa::radiomics
