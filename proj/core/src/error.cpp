#include "circa/error.hpp"

namespace circa {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
        case ErrorCode::CorruptStream: return "CorruptStream";
        case ErrorCode::NonImageDicom: return "NonImageDicom";
        case ErrorCode::PatchShapeMismatch: return "PatchShapeMismatch";
        case ErrorCode::NoLungFound: return "NoLungFound";
        case ErrorCode::EmptyMask: return "EmptyMask";
        case ErrorCode::TooFewSamples: return "TooFewSamples";
        case ErrorCode::EmptySegment: return "EmptySegment";
        case ErrorCode::DegenerateGroups: return "DegenerateGroups";
        case ErrorCode::DegenerateMatrix: return "DegenerateMatrix";
        case ErrorCode::TooFewPoints: return "TooFewPoints";
        case ErrorCode::EmptyTrainSet: return "EmptyTrainSet";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::EmptyDataset: return "EmptyDataset";
        case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorCode::BackendUnavailable: return "BackendUnavailable";
        case ErrorCode::InferenceFailure: return "InferenceFailure";
        case ErrorCode::InsufficientClassCases: return "InsufficientClassCases";
        case ErrorCode::EmptyMatrix: return "EmptyMatrix";
        case ErrorCode::ZeroTotalWeight: return "ZeroTotalWeight";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::MissingPredictions: return "MissingPredictions";
        case ErrorCode::CorruptModel: return "CorruptModel";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message, std::string stage)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      stage_(std::move(stage)) {}

Error Error::with_stage(std::string stage) const {
    Error copy = *this;
    if (copy.stage_.empty()) copy.stage_ = std::move(stage);
    return copy;
}

}  // namespace circa
