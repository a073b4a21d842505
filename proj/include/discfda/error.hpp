/**
 * @file error.hpp
 * @brief Error codes shared by every discfda module
 */

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace discfda {

enum class ErrorCode {
    // discount_core
    MissingAnswer,
    NonPositiveAmount,
    DiscountAboveOne,
    TimerInvalidated,
    TimeOutsideDomain,
    DegenerateDenominator,
    EmptyGroup,
    InvalidArgument,
    // basis_quad
    KnotOutsideDomain,
    OrderTooSmall,
    OutOfDomain,
    LengthMismatch,
    // monotone_fit
    NonConvergence,
    PositivityViolation,
    // functional_stats
    GridMismatch,
    MissingDerivatives,
    FewerThanTwoGroups,
    // functional_cluster
    TooFewCurves,
    EmptyClusterUnrecoverable,
    ClassTooSmall,
    SingleCluster,
    // pipeline
    ParseError,
    SchemaVersionUnsupported,
    DuplicateRespondent,
    BindFailure,
    StoreWriteFailure,
    IoError,
};

constexpr std::string_view code_name(ErrorCode code) {
    switch (code) {
    case ErrorCode::MissingAnswer: return "MissingAnswer";
    case ErrorCode::NonPositiveAmount: return "NonPositiveAmount";
    case ErrorCode::DiscountAboveOne: return "DiscountAboveOne";
    case ErrorCode::TimerInvalidated: return "TimerInvalidated";
    case ErrorCode::TimeOutsideDomain: return "TimeOutsideDomain";
    case ErrorCode::DegenerateDenominator: return "DegenerateDenominator";
    case ErrorCode::EmptyGroup: return "EmptyGroup";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::KnotOutsideDomain: return "KnotOutsideDomain";
    case ErrorCode::OrderTooSmall: return "OrderTooSmall";
    case ErrorCode::OutOfDomain: return "OutOfDomain";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::PositivityViolation: return "PositivityViolation";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::MissingDerivatives: return "MissingDerivatives";
    case ErrorCode::FewerThanTwoGroups: return "FewerThanTwoGroups";
    case ErrorCode::TooFewCurves: return "TooFewCurves";
    case ErrorCode::EmptyClusterUnrecoverable: return "EmptyClusterUnrecoverable";
    case ErrorCode::ClassTooSmall: return "ClassTooSmall";
    case ErrorCode::SingleCluster: return "SingleCluster";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SchemaVersionUnsupported: return "SchemaVersionUnsupported";
    case ErrorCode::DuplicateRespondent: return "DuplicateRespondent";
    case ErrorCode::BindFailure: return "BindFailure";
    case ErrorCode::StoreWriteFailure: return "StoreWriteFailure";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

/// Exception carrying a machine-readable code. The message is prefixed with
/// the code name so that `what()` alone is enough for logs.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& detail)
        : std::runtime_error(std::string(code_name(code)) + ": " + detail), code_(code), detail_(detail) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

}  // namespace discfda
