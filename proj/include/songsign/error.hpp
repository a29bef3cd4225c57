#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace songsign {

enum class ErrorCode {
    InvalidArgument,
    InvalidTransition,
    UnbalancedBracket,
    BothEmpty,
    MalformedTimestamp,
    EmptyDocument,
    NotFound,
    Unavailable,
    MissingSubtitles,
    LiveModeDisabled,
    SegmentOutOfRange,
    MissingPlaceholder,
    ProviderError,
    MockMiss,
    ValidationExhausted,
    UnparseableGloss,
    ThreadExists,
    NotNoteworthy,
    NotReady,
    Busy,
    ConflictingVersion,
    StoreError,
};

std::string_view to_string(ErrorCode code);

// Every failure in the library surfaces as this one exception type; the code
// selects the handling and `details` carries machine-readable context (byte
// offsets, missing names, last raw response, ...).
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message, nlohmann::json details = nlohmann::json::object())
        : std::runtime_error(message), code_(code), details_(std::move(details)) {}

    ErrorCode code() const noexcept { return code_; }
    const nlohmann::json& details() const noexcept { return details_; }

private:
    ErrorCode code_;
    nlohmann::json details_;
};

} // namespace songsign
