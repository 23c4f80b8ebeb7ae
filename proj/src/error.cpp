#include "mlcd/error.hpp"

namespace mlcd {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::ZeroVector: return "ZeroVector";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::NotNormalized: return "NotNormalized";
        case ErrorCode::NonFinite: return "NonFinite";
        case ErrorCode::TooManyClusters: return "TooManyClusters";
        case ErrorCode::BadPositiveCount: return "BadPositiveCount";
        case ErrorCode::BadThreshold: return "BadThreshold";
        case ErrorCode::BadRatio: return "BadRatio";
        case ErrorCode::BadLabel: return "BadLabel";
        case ErrorCode::EmptyPositives: return "EmptyPositives";
        case ErrorCode::EmptyNegatives: return "EmptyNegatives";
        case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorCode::DegenerateLabels: return "DegenerateLabels";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::Format: return "Format";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

}  // namespace mlcd
