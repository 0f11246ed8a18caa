#include "rcmodal/error.hpp"

namespace rcmodal {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::NonConvergence: return "NonConvergence";
        case ErrorKind::NotStrictlyProper: return "NotStrictlyProper";
        case ErrorKind::RepeatedPoleUnsupported: return "RepeatedPoleUnsupported";
        case ErrorKind::ComplexPoleUnsupported: return "ComplexPoleUnsupported";
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::UnsupportedOrder: return "UnsupportedOrder";
        case ErrorKind::SingularSystem: return "SingularSystem";
        case ErrorKind::NewtonDivergence: return "NewtonDivergence";
        case ErrorKind::SingularJacobian: return "SingularJacobian";
        case ErrorKind::DegenerateWaveform: return "DegenerateWaveform";
        case ErrorKind::NonPositiveTime: return "NonPositiveTime";
        case ErrorKind::EmptyModes: return "EmptyModes";
        case ErrorKind::ShapeMismatch: return "ShapeMismatch";
        case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorKind::MissingOrderDataset: return "MissingOrderDataset";
        case ErrorKind::OrderExceedsCascade: return "OrderExceedsCascade";
        case ErrorKind::VersionMismatch: return "VersionMismatch";
        case ErrorKind::CorruptFile: return "CorruptFile";
        case ErrorKind::DegenerateGolden: return "DegenerateGolden";
        case ErrorKind::Io: return "Io";
    }
    return "Unknown";
}

bool Error::is_validation() const noexcept {
    switch (kind_) {
        case ErrorKind::NotStrictlyProper:
        case ErrorKind::RepeatedPoleUnsupported:
        case ErrorKind::ComplexPoleUnsupported:
        case ErrorKind::InvalidArgument:
        case ErrorKind::UnsupportedOrder:
        case ErrorKind::NonPositiveTime:
        case ErrorKind::EmptyModes:
        case ErrorKind::ShapeMismatch:
        case ErrorKind::MissingOrderDataset:
        case ErrorKind::OrderExceedsCascade:
        case ErrorKind::VersionMismatch:
        case ErrorKind::CorruptFile:
        case ErrorKind::DegenerateGolden:
        case ErrorKind::DegenerateWaveform:
            return true;
        default:
            return false;
    }
}

}  // namespace rcmodal
