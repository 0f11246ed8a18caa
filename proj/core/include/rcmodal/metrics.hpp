#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace rcmodal {

/// 1 - SS_res / SS_tot, SS_tot taken about the golden mean. Throws
/// DegenerateGolden for a constant golden series, ShapeMismatch for unequal
/// lengths and InvalidArgument for fewer than two points.
[[nodiscard]] double r_squared(std::span<const double> predicted, std::span<const double> golden);

[[nodiscard]] double mean_squared_error(std::span<const double> predicted, std::span<const double> golden);
[[nodiscard]] double max_abs_error(std::span<const double> predicted, std::span<const double> golden);

/// N m / N^m: the fraction of an m-pole joint state space reached by training
/// on m independent single-pole sets of N states each. Evaluated in log space.
[[nodiscard]] double coverage_fraction(double states_per_pole, int order);

/// Least-squares slope of log(y) against log(x).
[[nodiscard]] double loglog_slope(std::span<const double> x, std::span<const double> y);

[[nodiscard]] std::uint64_t fnv1a64(std::string_view bytes) noexcept;
/// 16 lowercase hex digits of fnv1a64.
[[nodiscard]] std::string hex_digest(std::string_view bytes);

}  // namespace rcmodal
