#include "pamtt/error.hpp"

namespace pamtt {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::NonFinite: return "NonFinite";
        case ErrorCode::BadBounce: return "BadBounce";
        case ErrorCode::BadNormal: return "BadNormal";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::SchemaError: return "SchemaError";
        case ErrorCode::EmptyDataset: return "EmptyDataset";
        case ErrorCode::TooShort: return "TooShort";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::NotHit: return "NotHit";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

}  // namespace pamtt
