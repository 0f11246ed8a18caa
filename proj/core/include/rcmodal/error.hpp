#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rcmodal {

enum class ErrorKind {
    // modal_core
    NonConvergence,
    NotStrictlyProper,
    RepeatedPoleUnsupported,
    ComplexPoleUnsupported,
    InvalidArgument,
    // netgen
    UnsupportedOrder,
    SingularSystem,
    // refsim
    NewtonDivergence,
    SingularJacobian,
    // dataset
    DegenerateWaveform,
    NonPositiveTime,
    EmptyModes,
    // surrogate
    ShapeMismatch,
    NonFiniteLoss,
    MissingOrderDataset,
    OrderExceedsCascade,
    VersionMismatch,
    CorruptFile,
    // metrics
    DegenerateGolden,
    Io,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Single exception type for the library; `kind()` distinguishes the failure.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

    /// Errors caused by bad user input rather than a runtime failure.
    [[nodiscard]] bool is_validation() const noexcept;

private:
    ErrorKind kind_;
};

}  // namespace rcmodal
