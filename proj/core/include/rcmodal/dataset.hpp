#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string_view>
#include <vector>

#include "rcmodal/decomposition.hpp"
#include "rcmodal/network.hpp"
#include "rcmodal/refsim.hpp"
#include "rcmodal/waveform.hpp"

namespace rcmodal {

struct NormalizedWaveform {
    std::vector<double> values;
    double v_min = 0.0;
    double v_max = 0.0;
};

/// (V - min V) / (max V - min V). Throws DegenerateWaveform when the range is
/// below 1e-12.
[[nodiscard]] NormalizedWaveform normalize_waveform(std::span<const double> values);
[[nodiscard]] std::vector<double> denormalize_waveform(std::span<const double> normalized, double v_min, double v_max);

/// (log10 t - mu_t) / sigma_t. Throws NonPositiveTime for t <= 0.
[[nodiscard]] std::vector<double> normalize_times(std::span<const double> times, double mu_t, double sigma_t);

struct NormalizedMode {
    double p;  // rate / max rate, in (0, 1]
    double a;  // gain / max |gain|, in [-1, 1]

    friend bool operator==(const NormalizedMode&, const NormalizedMode&) = default;
};

struct NormalizedModes {
    std::vector<NormalizedMode> modes;
    double p_max = 0.0;
    double a_max = 0.0;
};

/// Divides rates by their maximum and gains by their largest magnitude, then
/// sorts by descending |a| with larger p first on ties. Throws EmptyModes.
[[nodiscard]] NormalizedModes normalize_modes(std::span<const GainMode> modes);

enum class Split { Train = 0, Val = 1, Test = 2 };
[[nodiscard]] std::string_view to_string(Split s) noexcept;

enum class DriverChoice { IdealStep, Saturating, Mixed };
[[nodiscard]] DriverChoice parse_driver_choice(std::string_view s);
[[nodiscard]] std::string_view to_string(DriverChoice c) noexcept;

struct DatasetConfig {
    std::vector<int> orders{1, 2, 3};
    int per_order = 200;
    std::uint64_t seed = 1;
    DriverChoice driver = DriverChoice::Saturating;
    double vdd = 1.1;
    double knee = 0.4;
    double dt = 10e-12;
    double t_end = 20e-9;
    /// Dominant time constant drawn log-uniform in [tau_lo_steps * dt, t_end / tau_hi_divisor].
    double tau_lo_steps = 2.0;
    double tau_hi_divisor = 15.0;
    int max_substeps = 256;
    NetgenOptions netgen{};

    void validate() const;
};

/// One stored circuit: conditioning features plus the normalized golden.
struct Sample {
    int order = 0;
    int index = 0;
    Split split = Split::Train;
    DriverKind device = DriverKind::Saturating;
    RcNetwork network;
    std::vector<GainMode> gains;  // physical rates (1/s) and gains, sorted like `modes`
    std::vector<NormalizedMode> modes;
    double p_max = 0.0;
    double a_max = 0.0;
    double v_min = 0.0;
    double v_max = 0.0;
    int substeps = 1;
    std::vector<double> target;  // normalized golden on the grid
};

struct DatasetManifest {
    int format_version = 1;
    DatasetConfig config;
    double mu_t = 0.0;
    double sigma_t = 1.0;
    std::map<int, int> counts;
    std::map<int, int> resampled;
    /// Mean over samples of max |V - V_linear| / vdd.
    std::map<int, double> nonlinear_deviation;
};

struct Dataset {
    DatasetManifest manifest;
    std::map<int, std::vector<Sample>> by_order;

    /// Grid 0, dt, ..., t_end (physical seconds).
    [[nodiscard]] std::vector<double> times() const;
    /// Normalized log-times of one sample: t = 0 is taken at dt / 2 and time is
    /// measured in units of the sample's fastest time constant 1 / p_max.
    [[nodiscard]] std::vector<double> sample_times(const Sample& s) const;
    [[nodiscard]] std::vector<const Sample*> select(int order, Split split) const;
};

/// Generates every sample in memory; deterministic in config.seed. Samples
/// with repeated or complex poles, degenerate waveforms or unsettled goldens
/// are redrawn and counted in manifest.resampled.
[[nodiscard]] Dataset generate_dataset(const DatasetConfig& cfg);

/// Writes order_<n>.ndjson per order and manifest.json into `dir`.
void write_dataset(const Dataset& d, const std::filesystem::path& dir);

/// Reads a directory written by write_dataset. With `orders` nonempty, only
/// those files are read; a missing one raises MissingOrderDataset.
[[nodiscard]] Dataset load_dataset(const std::filesystem::path& dir, std::span<const int> orders = {});

/// generate_dataset followed by write_dataset.
Dataset build_dataset(const DatasetConfig& cfg, const std::filesystem::path& dir);

}  // namespace rcmodal
