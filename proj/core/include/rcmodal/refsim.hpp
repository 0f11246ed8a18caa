#pragma once

#include <string_view>
#include <vector>

#include "rcmodal/network.hpp"
#include "rcmodal/waveform.hpp"

namespace rcmodal {

enum class DriverKind { IdealStep = 0, Saturating = 1 };

[[nodiscard]] std::string_view to_string(DriverKind k) noexcept;
[[nodiscard]] DriverKind parse_driver_kind(std::string_view s);

/// Source at the network input.
///
/// ideal_step: vdd behind the network's first resistor r[input].
/// saturating: replaces r[input] by a current source
///   i = strength * tanh((vdd - v_in) / knee).
struct DriverModel {
    DriverKind kind = DriverKind::Saturating;
    double vdd = 1.1;
    double strength = 1e-3;  // amperes
    double knee = 0.4;       // volts

    static DriverModel ideal_step(double vdd = 1.1) { return {DriverKind::IdealStep, vdd, 1.0, 1.0}; }

    /// Saturating driver whose small-signal conductance strength/knee equals
    /// 1/r[input], so it reduces to the ideal step for small swings.
    static DriverModel matched(const RcNetwork& net, double vdd = 1.1, double knee = 0.4) {
        return {DriverKind::Saturating, vdd, knee / net.driver_resistance(), knee};
    }

    /// Throws InvalidArgument unless vdd, strength and knee are positive.
    void validate() const;
};

struct SimConfig {
    double t_end = 20e-9;
    double dt = 10e-12;
    double newton_tol = 1e-9;  // volts, max-norm of the Newton update
    int newton_max_iter = 50;
    /// Internal trapezoidal steps per output sample (fixed, not adaptive).
    int substeps = 1;

    void validate() const;
    [[nodiscard]] std::size_t steps() const;
};

struct SimStats {
    std::size_t steps = 0;
    std::size_t newton_iterations = 0;
    int max_iterations_per_step = 0;
    /// When set before the call, receives the residual max-norm at the start
    /// of every Newton iteration, one vector per time step.
    bool record_residuals = false;
    std::vector<std::vector<double>> residuals;
};

/// Trapezoidal integration of C dV/dt = -G V + i_driver(V) from V = 0 with
/// the source switched on at 0-. Every step is solved by full Newton-Raphson
/// with a dense LU factorization of the Jacobian. Returns V at the output node
/// on the uniform grid 0, dt, ..., t_end; with substeps > 1 the integrator
/// steps at dt / substeps and keeps every substeps-th state.
///
/// Throws NewtonDivergence if the update does not fall below newton_tol within
/// newton_max_iter iterations, SingularJacobian on a zero pivot.
[[nodiscard]] Waveform simulate(const RcNetwork& net, const DriverModel& driver, const SimConfig& cfg,
                                SimStats* stats = nullptr);

/// Same, returning every node voltage; row k is the state at times[k].
[[nodiscard]] std::vector<std::vector<double>> simulate_states(const RcNetwork& net, const DriverModel& driver,
                                                               const SimConfig& cfg, SimStats* stats = nullptr);

struct RuntimeMeasurement {
    double mean_seconds = 0.0;
    double median_seconds = 0.0;
    double per_step_seconds = 0.0;  // mean_seconds / number of steps
    int repetitions = 0;
};

/// Wall time of simulate() over `repetitions` (>= 3) runs after one warm-up.
[[nodiscard]] RuntimeMeasurement measure_runtime(const RcNetwork& net, const DriverModel& driver,
                                                 const SimConfig& cfg, int repetitions = 5);

/// Wall time of one Newton linear solve for this network: Jacobian assembly,
/// dense LU factorization and the two triangular solves, at the zero state.
/// Timed in a tight loop of `solves` repetitions (median of 5 such loops) so
/// the per-step overhead of the integrator does not hide the O(n^3) trend.
[[nodiscard]] double measure_newton_solve(const RcNetwork& net, const DriverModel& driver, const SimConfig& cfg,
                                          int solves = 20000);

}  // namespace rcmodal
