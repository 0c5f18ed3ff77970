#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace reflow {

enum class ErrorKind {
    InvalidArgument,
    DivisorTooSmall,
    InvalidRecord,
    EmptyDataset,
    LengthMismatch,
    NoFeaturesLeft,
    ShapeMismatch,
    NotConverged,
    Diverged,
    TooFewRows,
    ConstantActual,
    IoError,
    ParseError,
    SchemaMismatch,
    WrongModelFamily,
};

std::string_view to_string(ErrorKind kind);

/// Library-wide exception. The kind is what callers branch on; the message is
/// for humans.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace reflow
