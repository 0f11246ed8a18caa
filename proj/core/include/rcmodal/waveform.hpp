#pragma once

#include <filesystem>
#include <vector>

namespace rcmodal {

/// Time-aligned voltage sequence. times in seconds, strictly increasing and
/// starting at 0; values in volts.
struct Waveform {
    std::vector<double> times;
    std::vector<double> values;

    [[nodiscard]] std::size_t size() const noexcept { return times.size(); }

    /// Throws InvalidArgument on length mismatch or non-increasing times.
    void validate() const;
};

/// Uniform grid 0, dt, 2 dt, ..., up to t_end inclusive (within rounding).
[[nodiscard]] std::vector<double> uniform_grid(double t_end, double dt);

/// CSV with header `time_s,voltage_v`, 17 significant digits.
void write_waveform_csv(const Waveform& w, const std::filesystem::path& path);
[[nodiscard]] Waveform read_waveform_csv(const std::filesystem::path& path);

}  // namespace rcmodal
