#include "songsign/error.hpp"

namespace songsign {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidTransition: return "InvalidTransition";
    case ErrorCode::UnbalancedBracket: return "UnbalancedBracket";
    case ErrorCode::BothEmpty: return "BothEmpty";
    case ErrorCode::MalformedTimestamp: return "MalformedTimestamp";
    case ErrorCode::EmptyDocument: return "EmptyDocument";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::Unavailable: return "Unavailable";
    case ErrorCode::MissingSubtitles: return "MissingSubtitles";
    case ErrorCode::LiveModeDisabled: return "LiveModeDisabled";
    case ErrorCode::SegmentOutOfRange: return "SegmentOutOfRange";
    case ErrorCode::MissingPlaceholder: return "MissingPlaceholder";
    case ErrorCode::ProviderError: return "ProviderError";
    case ErrorCode::MockMiss: return "MockMiss";
    case ErrorCode::ValidationExhausted: return "ValidationExhausted";
    case ErrorCode::UnparseableGloss: return "UnparseableGloss";
    case ErrorCode::ThreadExists: return "ThreadExists";
    case ErrorCode::NotNoteworthy: return "NotNoteworthy";
    case ErrorCode::NotReady: return "NotReady";
    case ErrorCode::Busy: return "Busy";
    case ErrorCode::ConflictingVersion: return "ConflictingVersion";
    case ErrorCode::StoreError: return "StoreError";
    }
    return "Unknown";
}

} // namespace songsign
