#include "reflow/error.hpp"

namespace reflow {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::DivisorTooSmall: return "DivisorTooSmall";
        case ErrorKind::InvalidRecord: return "InvalidRecord";
        case ErrorKind::EmptyDataset: return "EmptyDataset";
        case ErrorKind::LengthMismatch: return "LengthMismatch";
        case ErrorKind::NoFeaturesLeft: return "NoFeaturesLeft";
        case ErrorKind::ShapeMismatch: return "ShapeMismatch";
        case ErrorKind::NotConverged: return "NotConverged";
        case ErrorKind::Diverged: return "Diverged";
        case ErrorKind::TooFewRows: return "TooFewRows";
        case ErrorKind::ConstantActual: return "ConstantActual";
        case ErrorKind::IoError: return "IoError";
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::SchemaMismatch: return "SchemaMismatch";
        case ErrorKind::WrongModelFamily: return "WrongModelFamily";
    }
    return "Unknown";
}

}  // namespace reflow
