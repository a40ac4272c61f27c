#include "dfrag/error.hpp"

namespace dfrag {

std::string_view toString(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::ZeroVector: return "ZeroVector";
        case ErrorKind::NonFinite: return "NonFinite";
        case ErrorKind::DimMismatch: return "DimMismatch";
        case ErrorKind::EmptySet: return "EmptySet";
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::MissingField: return "MissingField";
        case ErrorKind::EmptyContext: return "EmptyContext";
        case ErrorKind::ServiceError: return "ServiceError";
        case ErrorKind::CacheCorrupt: return "CacheCorrupt";
        case ErrorKind::NotEmbedded: return "NotEmbedded";
        case ErrorKind::EmptyPool: return "EmptyPool";
        case ErrorKind::LambdaOutOfRange: return "LambdaOutOfRange";
        case ErrorKind::GridTooSmall: return "GridTooSmall";
        case ErrorKind::InvalidGrid: return "InvalidGrid";
        case ErrorKind::MissingPlaceholder: return "MissingPlaceholder";
        case ErrorKind::Transport: return "Transport";
        case ErrorKind::BadStatus: return "BadStatus";
        case ErrorKind::EmptyCompletion: return "EmptyCompletion";
        case ErrorKind::LengthMismatch: return "LengthMismatch";
        case ErrorKind::PlanParseError: return "PlanParseError";
        case ErrorKind::EvalParseError: return "EvalParseError";
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::ConfigError: return "ConfigError";
        case ErrorKind::DatasetError: return "DatasetError";
        case ErrorKind::IoError: return "IoError";
    }
    return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message, std::string detail,
             std::optional<int> status)
    : std::runtime_error(std::string(toString(kind)) + ": " + message),
      kind_(kind),
      detail_(std::move(detail)),
      status_(status) {}

void fail(ErrorKind kind, const std::string& message, std::string detail) {
    throw Error(kind, message, std::move(detail));
}

}  // namespace dfrag
