#pragma once

#include <span>
#include <vector>

#include "rcmodal/polynomial.hpp"
#include "rcmodal/roots.hpp"
#include "rcmodal/waveform.hpp"

namespace rcmodal {

/// One partial-fraction term residue / (s - pole)^power.
struct Mode {
    Complex pole;
    Complex residue;
    int power = 1;

    friend bool operator==(const Mode&, const Mode&) = default;
};

struct ModalDecomposition {
    std::vector<Mode> modes;
    int source_order = 0;

    /// Sum of residue / (s - pole)^power.
    [[nodiscard]] Complex operator()(Complex s) const noexcept;
    [[nodiscard]] bool all_simple() const noexcept;
    [[nodiscard]] bool all_real() const noexcept;
};

/// Partial-fraction expansion of a strictly proper H.
///
/// Simple poles take r = N(p)/D'(p). A pole of multiplicity k yields terms
/// j = 1..k with r_{j} = 1/(k-j)! d^{k-j}/ds^{k-j}[(s-p)^k H(s)] at p, computed
/// exactly by deflating D and dividing Taylor series of N and the deflated D
/// about p. Work is done in a balanced frequency scale and mapped back.
///
/// Modes are ordered like find_poles (descending real part), and by ascending
/// power within a repeated pole.
[[nodiscard]] ModalDecomposition decompose(const TransferFunction& h, const RootOptions& options = {});

/// Mode in gain form A / (s/rate + 1): decay rate > 0 and DC gain A = r/rate.
struct GainMode {
    double rate;
    double gain;

    friend bool operator==(const GainMode&, const GainMode&) = default;
};

/// Throws RepeatedPoleUnsupported / ComplexPoleUnsupported, and
/// InvalidArgument for a non-negative real pole.
[[nodiscard]] std::vector<GainMode> to_gain_form(const ModalDecomposition& d);

/// Exact response to amplitude * u(t) at the given times (nonnegative,
/// strictly increasing). Conjugate pairs sum to a real signal.
[[nodiscard]] Waveform analytic_step_response(const ModalDecomposition& d, std::span<const double> times,
                                              double amplitude = 1.0);

/// Same for the gain form: sum A_i (1 - exp(-p_i t)).
[[nodiscard]] Waveform analytic_step_response(std::span<const GainMode> modes, std::span<const double> times,
                                              double amplitude = 1.0);

}  // namespace rcmodal
