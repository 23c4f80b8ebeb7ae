#ifndef MLCD_ERROR_HPP
#define MLCD_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace mlcd {

enum class ErrorCode {
    ZeroVector,
    DimensionMismatch,
    NotNormalized,
    NonFinite,
    TooManyClusters,
    BadPositiveCount,
    BadThreshold,
    BadRatio,
    BadLabel,
    EmptyPositives,
    EmptyNegatives,
    NonFiniteLoss,
    DegenerateLabels,
    InvalidArgument,
    Format,
    Io,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

// Numeric failures (exit code 3 at the command line) vs. everything else.
inline bool is_numeric_failure(ErrorCode code) {
    return code == ErrorCode::NonFiniteLoss;
}

}  // namespace mlcd

#endif  // MLCD_ERROR_HPP
