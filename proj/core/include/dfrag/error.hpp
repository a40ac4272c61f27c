#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dfrag {

enum class ErrorKind {
    // vecspace
    ZeroVector,
    NonFinite,
    DimMismatch,
    EmptySet,
    // corpus
    ParseError,
    MissingField,
    EmptyContext,
    ServiceError,
    CacheCorrupt,
    NotEmbedded,
    // retrieval
    EmptyPool,
    LambdaOutOfRange,
    GridTooSmall,
    InvalidGrid,
    // llm
    MissingPlaceholder,
    Transport,
    BadStatus,
    EmptyCompletion,
    LengthMismatch,
    // pipeline
    PlanParseError,
    EvalParseError,
    // metrics / harness
    InvalidArgument,
    ConfigError,
    DatasetError,
    IoError,
};

std::string_view toString(ErrorKind kind) noexcept;

/// Single exception type for the library; callers branch on kind().
///
/// `detail()` carries the structured payload a kind implies: the missing
/// field or placeholder name, the offending line, the HTTP body excerpt.
/// `status()` is set only for BadStatus.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message, std::string detail = {},
          std::optional<int> status = std::nullopt);

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& detail() const noexcept { return detail_; }
    std::optional<int> status() const noexcept { return status_; }

private:
    ErrorKind kind_;
    std::string detail_;
    std::optional<int> status_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message, std::string detail = {});

}  // namespace dfrag
