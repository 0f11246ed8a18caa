#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "rcmodal/decomposition.hpp"
#include "rcmodal/error.hpp"
#include "rcmodal/network.hpp"
#include "rcmodal/refsim.hpp"

using namespace rcmodal;
using Catch::Approx;

namespace {

RcNetwork unit_ladder(int n) {
    RcNetwork net;
    for (int k = 0; k < n; ++k) {
        net.parent.push_back(k - 1);
        net.r.push_back(1.0);
        net.c.push_back(1.0);
    }
    net.output = n - 1;
    return net;
}

// Generated network rescaled so the slowest time constant is `tau`.
RcNetwork scaled_network(int order, Topology topo, std::uint64_t seed, double tau, std::vector<GainMode>& modes) {
    const RcNetwork raw = generate_network(order, topo, seed);
    auto m = to_gain_form(decompose(extract_transfer_function(assemble_nodal(raw))));
    double p_min = m[0].rate;
    for (const auto& g : m) p_min = std::min(p_min, g.rate);
    const RcNetwork net = raw.scaled_resistance(tau * p_min);
    modes = to_gain_form(decompose(extract_transfer_function(assemble_nodal(net))));
    return net;
}

double max_rate(const std::vector<GainMode>& modes) {
    double p = 0.0;
    for (const auto& g : modes) p = std::max(p, g.rate);
    return p;
}

// Classical RK4 at a fixed tiny step, for the scalar saturating circuit
// C dv/dt = s tanh((vdd - v)/k).
double rk4_scalar(double vdd, double s, double k, double c, double t_end, int n) {
    auto f = [&](double v) { return s * std::tanh((vdd - v) / k) / c; };
    const double h = t_end / n;
    double v = 0.0;
    for (int i = 0; i < n; ++i) {
        const double k1 = f(v);
        const double k2 = f(v + 0.5 * h * k1);
        const double k3 = f(v + 0.5 * h * k2);
        const double k4 = f(v + h * k3);
        v += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    return v;
}

}  // namespace

TEST_CASE("first-order ideal step is 1 - exp(-t)", "[refsim]") {
    SimConfig cfg;
    cfg.t_end = 5.0;
    cfg.dt = 1e-3;
    const Waveform w = simulate(unit_ladder(1), DriverModel::ideal_step(1.0), cfg);
    REQUIRE(w.size() == 5001);
    double worst = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) worst = std::max(worst, std::abs(w.values[k] + std::expm1(-w.times[k])));
    CHECK(worst < 1e-6);
}

TEST_CASE("saturating driver settles at vdd", "[refsim]") {
    const RcNetwork net = unit_ladder(3);
    SimConfig cfg;
    cfg.t_end = 80.0;
    cfg.dt = 0.01;
    const Waveform w = simulate(net, DriverModel::matched(net, 1.1, 0.4), cfg);
    CHECK(w.values.back() == Approx(1.1).margin(1e-6));
}

TEST_CASE("scalar saturating case matches a fine RK4 oracle", "[refsim]") {
    const RcNetwork net = unit_ladder(1);
    const DriverModel drv = DriverModel::matched(net, 1.1, 0.4);
    SimConfig cfg;
    cfg.t_end = 4.0;
    cfg.dt = 1e-3;
    const Waveform w = simulate(net, drv, cfg);
    for (double t : {0.5, 1.0, 2.0, 4.0}) {
        const auto k = static_cast<std::size_t>(std::lround(t / cfg.dt));
        CHECK(std::abs(w.values[k] - rk4_scalar(drv.vdd, drv.strength, drv.knee, 1.0, t, 40000)) < 1e-5);
    }
}

TEST_CASE("ideal step agrees with the analytic modal response", "[refsim]") {
    for (int order = 1; order <= 10; ++order) {
        std::vector<GainMode> modes;
        const RcNetwork net = scaled_network(order, order % 2 ? Topology::Tree : Topology::Ladder,
                                             static_cast<std::uint64_t>(order) * 31, 1.0, modes);
        SimConfig cfg;
        cfg.dt = 1.0 / max_rate(modes) / 400.0;
        cfg.t_end = std::min(5.0, 2e4 * cfg.dt);
        const Waveform w = simulate(net, DriverModel::ideal_step(1.0), cfg);
        const Waveform a = analytic_step_response(modes, w.times, 1.0);
        double worst = 0.0;
        for (std::size_t k = 0; k < w.size(); ++k) worst = std::max(worst, std::abs(w.values[k] - a.values[k]));
        CHECK(worst < 1e-6);
    }
}

TEST_CASE("trapezoidal integration is second order", "[refsim]") {
    const RcNetwork net = unit_ladder(2);
    const DriverModel drv = DriverModel::matched(net, 1.1, 0.4);
    SimConfig fine;
    fine.t_end = 4.0;
    fine.dt = 0.1 / 16;
    const Waveform ref = simulate(net, drv, fine);
    auto error = [&](double dt) {
        SimConfig cfg = fine;
        cfg.dt = dt;
        const Waveform w = simulate(net, drv, cfg);
        const auto stride = static_cast<std::size_t>(std::lround(dt / fine.dt));
        double worst = 0.0;
        for (std::size_t k = 0; k < w.size(); ++k) worst = std::max(worst, std::abs(w.values[k] - ref.values[k * stride]));
        return worst;
    };
    const double ratio = error(0.1) / error(0.05);
    CHECK(ratio > 3.5);
    CHECK(ratio < 4.5);
}

TEST_CASE("ladder outputs charge monotonically within [0, vdd]", "[refsim]") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        std::vector<GainMode> modes;
        const RcNetwork net = scaled_network(6, Topology::Ladder, seed, 1e-9, modes);
        SimConfig cfg;
        cfg.t_end = 8e-9;
        cfg.dt = 1e-11;
        cfg.substeps = std::clamp(static_cast<int>(std::ceil(cfg.dt * max_rate(modes) / 8)), 1, 256);
        const DriverModel drv = DriverModel::matched(net, 1.1, 0.4);
        const Waveform w = simulate(net, drv, cfg);
        for (std::size_t k = 1; k < w.size(); ++k) CHECK(w.values[k] >= w.values[k - 1] - 1e-12);
        for (double v : w.values) CHECK((v >= -1e-9 && v <= drv.vdd + 1e-9));
    }
}

TEST_CASE("Newton residuals decrease within each step", "[refsim]") {
    const RcNetwork net = unit_ladder(4);
    SimConfig cfg;
    cfg.t_end = 3.0;
    cfg.dt = 0.05;
    SimStats stats;
    stats.record_residuals = true;
    (void)simulate(net, DriverModel::matched(net, 1.1, 0.4), cfg, &stats);
    REQUIRE(stats.residuals.size() == stats.steps);
    for (const auto& step : stats.residuals) {
        for (std::size_t i = 1; i < step.size(); ++i) CHECK(step[i] <= step[i - 1]);
    }
    CHECK(stats.max_iterations_per_step <= cfg.newton_max_iter);
}

TEST_CASE("Newton divergence raises", "[refsim]") {
    const RcNetwork net = unit_ladder(2);
    SimConfig cfg;
    cfg.t_end = 1.0;
    cfg.dt = 0.1;
    cfg.newton_max_iter = 1;
    CHECK_THROWS_MATCHES(simulate(net, DriverModel::matched(net, 1.1, 0.4), cfg), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.kind() == ErrorKind::NewtonDivergence; }));
}

TEST_CASE("configuration validation", "[refsim]") {
    SimConfig cfg;
    cfg.dt = -1.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = SimConfig{};
    cfg.newton_tol = 0.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    DriverModel d;
    d.vdd = 0.0;
    CHECK_THROWS_AS(d.validate(), Error);
    CHECK(parse_driver_kind("ideal_step") == DriverKind::IdealStep);
    CHECK_THROWS_AS(parse_driver_kind("cmos"), Error);
}

TEST_CASE("simulate_states ends at the output waveform", "[refsim]") {
    const RcNetwork net = unit_ladder(3);
    SimConfig cfg;
    cfg.t_end = 2.0;
    cfg.dt = 0.1;
    const DriverModel drv = DriverModel::matched(net, 1.1, 0.4);
    const auto states = simulate_states(net, drv, cfg);
    const Waveform w = simulate(net, drv, cfg);
    REQUIRE(states.size() == w.size());
    for (std::size_t k = 0; k < w.size(); ++k) CHECK(states[k][2] == w.values[k]);
}

TEST_CASE("measure_runtime", "[refsim]") {
    SimConfig cfg;
    cfg.t_end = 1.0;
    cfg.dt = 1e-3;
    const RcNetwork small = unit_ladder(1);
    const RcNetwork big = unit_ladder(10);
    CHECK_THROWS_AS(measure_runtime(small, DriverModel::matched(small), cfg, 2), Error);
    const auto a = measure_runtime(small, DriverModel::matched(small), cfg, 3);
    const auto b = measure_runtime(big, DriverModel::matched(big), cfg, 3);
    CHECK(a.repetitions == 3);
    CHECK(a.mean_seconds > 0.0);
    CHECK(b.mean_seconds > a.mean_seconds);
}

// Two ladders with the same poles and residues. The linear responses agree,
// but the saturating driver sees a different series resistance.
TEST_CASE("identical modes do not fix the saturating response", "[refsim]") {
    RcNetwork a;
    a.parent = {-1, 0};
    a.r = {100.0, 1000.0};
    a.c = {10e-15, 100e-15};
    a.output = 1;
    RcNetwork b = a;
    b.r = {1000.0, 1000.0 / 9.1};
    b.c = {10e-15, 91e-15};
    const auto ma = to_gain_form(decompose(extract_transfer_function(assemble_nodal(a))));
    const auto mb = to_gain_form(decompose(extract_transfer_function(assemble_nodal(b))));
    REQUIRE(ma.size() == 2);
    REQUIRE(mb.size() == 2);
    auto by_rate = [](const GainMode& x, const GainMode& y) { return x.rate < y.rate; };
    std::vector<GainMode> sa = ma, sb = mb;
    std::sort(sa.begin(), sa.end(), by_rate);
    std::sort(sb.begin(), sb.end(), by_rate);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(sa[i].rate == Approx(sb[i].rate).epsilon(1e-9));
        CHECK(sa[i].gain == Approx(sb[i].gain).epsilon(1e-9));
    }
    SimConfig cfg;
    cfg.t_end = 1e-9;
    cfg.dt = 1e-13;
    const Waveform la = simulate(a, DriverModel::ideal_step(1.1), cfg);
    const Waveform lb = simulate(b, DriverModel::ideal_step(1.1), cfg);
    const Waveform na = simulate(a, DriverModel::matched(a, 1.1, 0.4), cfg);
    const Waveform nb = simulate(b, DriverModel::matched(b, 1.1, 0.4), cfg);
    double linear = 0.0, saturating = 0.0;
    for (std::size_t k = 0; k < la.size(); ++k) {
        linear = std::max(linear, std::abs(la.values[k] - lb.values[k]));
        saturating = std::max(saturating, std::abs(na.values[k] - nb.values[k]));
    }
    CHECK(linear < 1e-6);
    CHECK(saturating > 0.1);
}
