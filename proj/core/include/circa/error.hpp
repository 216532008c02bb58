#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace circa {

enum class ErrorCode {
    InvalidArgument,
    UnsupportedFormat,
    CorruptStream,
    NonImageDicom,
    PatchShapeMismatch,
    NoLungFound,
    EmptyMask,
    TooFewSamples,
    EmptySegment,
    DegenerateGroups,
    DegenerateMatrix,
    TooFewPoints,
    EmptyTrainSet,
    ShapeMismatch,
    EmptyDataset,
    NonFiniteLoss,
    BackendUnavailable,
    InferenceFailure,
    InsufficientClassCases,
    EmptyMatrix,
    ZeroTotalWeight,
    DimensionMismatch,
    MissingPredictions,
    CorruptModel,
    InvalidConfig,
    Io,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the engine. The code is the machine-readable
/// part; the stage names the pipeline step that raised it, when known.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message, std::string stage = {});

    ErrorCode code() const noexcept { return code_; }
    const std::string& stage() const noexcept { return stage_; }

    /// Copy of this error tagged with a pipeline stage (keeps an existing tag).
    Error with_stage(std::string stage) const;

private:
    ErrorCode code_;
    std::string stage_;
};

}  // namespace circa
