#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "rcmodal/dataset.hpp"
#include "rcmodal/surrogate.hpp"

namespace rcmodal {

inline constexpr int kReportSchemaVersion = 1;

/// Accuracy of cascade inference on one order. Errors are in normalized units
/// (each golden mapped to [0, 1]), which R^2 is invariant to.
struct OrderAccuracy {
    int order = 0;
    int samples = 0;
    double r2 = 0.0;         // mean of per-sample R^2
    double r2_pooled = 0.0;  // one R^2 over all samples concatenated
    double r2_min = 0.0;
    double mse = 0.0;
    double max_abs_error = 0.0;
    int modules_used = 0;
};

/// `modules` < 0 uses the full cascade (extrapolating past the trained modules).
[[nodiscard]] OrderAccuracy evaluate_order(SurrogateBundle& bundle, const Dataset& data, int order, Split split,
                                           int modules = -1, int threads = 1);

struct GeneralizationOptions {
    std::vector<int> orders{4, 5, 6, 7, 8, 9};
    Split split = Split::Test;
    double coverage_states = 10.0;
    int threads = 1;
};

struct GeneralizationReport {
    std::vector<OrderAccuracy> rows;
    std::vector<double> coverage;  // coverage_fraction per row
    int trained_modules = 0;
    /// Free-form provenance (seeds, file hashes, config), copied into the JSON.
    std::map<std::string, std::string> provenance;
};

[[nodiscard]] GeneralizationReport run_generalization_experiment(SurrogateBundle& bundle, const Dataset& data,
                                                                 const GeneralizationOptions& opt = {});

/// Cascade truncated after k = 0..K modules on one order, plus the per-module
/// validation check recorded during training (MSE before and after module j on
/// the order-j validation split).
struct AblationReport {
    int order = 0;
    std::vector<OrderAccuracy> test;
    std::vector<OrderAccuracy> val;
    struct ModuleCheck {
        std::string name;
        int order = 0;
        double mse_before = 0.0;
        double mse_after = 0.0;
    };
    std::vector<ModuleCheck> modules;
    std::map<std::string, std::string> provenance;
};

[[nodiscard]] AblationReport run_ablation_experiment(SurrogateBundle& bundle, const Dataset& data, int order);

struct SpeedOptions {
    std::vector<int> orders{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    int steps = 1000;
    double t_end = 10e-9;
    int repetitions = 5;
    std::uint64_t seed = 1;
    Topology topology = Topology::Ladder;
    double vdd = 1.1;
    double knee = 0.4;
};

struct SpeedRow {
    int order = 0;
    int steps = 0;
    long newton_iterations = 0;
    int evaluations = 0;  // base + residual forward passes
    double oracle_seconds = 0.0;     // median
    double oracle_per_step = 0.0;
    double solve_seconds = 0.0;      // one Newton linear solve (assembly + LU + substitution)
    double solve_per_step = 0.0;     // solve_seconds * Newton iterations / steps
    double surrogate_seconds = 0.0;  // median
    double decompose_seconds = 0.0;  // median, not part of the ratio
    double speedup = 0.0;            // oracle_seconds / surrogate_seconds
};

struct SpeedReport {
    std::vector<SpeedRow> rows;
    double oracle_step_slope = 0.0;  // end-to-end per-step time, log-log over orders >= 2
    double solve_step_slope = 0.0;   // per-step solver time, log-log over orders >= 2
    double surrogate_slope = 0.0;
    std::string machine;
    std::map<std::string, std::string> provenance;
};

/// Both engines are warmed up once and timed as the median of
/// `repetitions` wall-clock runs on a single thread.
[[nodiscard]] SpeedReport run_speed_experiment(SurrogateBundle& bundle, const SpeedOptions& opt = {});

/// The network the speed experiment uses for `order`: a generated circuit
/// rescaled so its slowest time constant is t_end / 15.
[[nodiscard]] RcNetwork speed_network(int order, const SpeedOptions& opt);

// Reports serialize to JSON with a top-level "schema_version"; tables also go
// to CSV. Timing fields live under "timing" keys.
[[nodiscard]] std::string to_json(const GeneralizationReport& r);
[[nodiscard]] std::string to_json(const AblationReport& r);
[[nodiscard]] std::string to_json(const SpeedReport& r);
void write_csv(const GeneralizationReport& r, const std::filesystem::path& path);
void write_csv(const AblationReport& r, const std::filesystem::path& path);
void write_csv(const SpeedReport& r, const std::filesystem::path& path);

/// For each order, the first `per_order` test samples as CSV
/// `time_s,golden_v,predicted_v` in dir/plot_order_<n>_<index>.csv. Returns
/// the written paths.
std::vector<std::filesystem::path> emit_plots(SurrogateBundle& bundle, const Dataset& data,
                                              const std::vector<int>& orders, const std::filesystem::path& dir,
                                              int per_order = 1);

/// Short description of the host used in speed reports.
[[nodiscard]] std::string machine_descriptor();

}  // namespace rcmodal
