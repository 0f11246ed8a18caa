#include "rcmodal/refsim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "rcmodal/error.hpp"

namespace rcmodal {

std::string_view to_string(DriverKind k) noexcept { return k == DriverKind::IdealStep ? "ideal_step" : "saturating"; }

DriverKind parse_driver_kind(std::string_view s) {
    if (s == "ideal_step") return DriverKind::IdealStep;
    if (s == "saturating") return DriverKind::Saturating;
    throw Error(ErrorKind::InvalidArgument, "unknown driver kind '" + std::string(s) + "'");
}

void DriverModel::validate() const {
    if (!(vdd > 0.0) || !(strength > 0.0) || !(knee > 0.0) || !std::isfinite(vdd) || !std::isfinite(strength) ||
        !std::isfinite(knee)) {
        throw Error(ErrorKind::InvalidArgument, "driver needs positive finite vdd, strength and knee");
    }
}

void SimConfig::validate() const {
    if (!(t_end > 0.0) || !(dt > 0.0) || dt > t_end || !(newton_tol > 0.0) || newton_max_iter < 1 ||
        substeps < 1) {
        throw Error(ErrorKind::InvalidArgument, "sim config needs t_end > 0, 0 < dt <= t_end, newton_tol > 0");
    }
}

std::size_t SimConfig::steps() const { return static_cast<std::size_t>(std::llround(t_end / dt)); }

namespace {

// Row-major dense LU with partial pivoting, solved in place.
class DenseLu {
public:
    explicit DenseLu(int n) : n_(n), a_(static_cast<std::size_t>(n * n)), piv_(static_cast<std::size_t>(n)) {}

    double* data() noexcept { return a_.data(); }

    void factor() {
        for (int k = 0; k < n_; ++k) {
            int p = k;
            double best = std::abs(at(k, k));
            for (int i = k + 1; i < n_; ++i) {
                if (std::abs(at(i, k)) > best) {
                    best = std::abs(at(i, k));
                    p = i;
                }
            }
            if (!(best > 0.0)) throw Error(ErrorKind::SingularJacobian, "zero pivot in Newton Jacobian");
            piv_[static_cast<std::size_t>(k)] = p;
            if (p != k) {
                for (int j = 0; j < n_; ++j) std::swap(at(k, j), at(p, j));
            }
            const double inv = 1.0 / at(k, k);
            for (int i = k + 1; i < n_; ++i) {
                const double l = at(i, k) * inv;
                at(i, k) = l;
                for (int j = k + 1; j < n_; ++j) at(i, j) -= l * at(k, j);
            }
        }
    }

    void solve(std::vector<double>& b) const {
        for (std::size_t k = 0; k < piv_.size(); ++k) std::swap(b[k], b[static_cast<std::size_t>(piv_[k])]);
        for (int i = 0; i < n_; ++i) {
            double s = b[static_cast<std::size_t>(i)];
            for (int j = 0; j < i; ++j) s -= at(i, j) * b[static_cast<std::size_t>(j)];
            b[static_cast<std::size_t>(i)] = s;
        }
        for (int i = n_ - 1; i >= 0; --i) {
            double s = b[static_cast<std::size_t>(i)];
            for (int j = i + 1; j < n_; ++j) s -= at(i, j) * b[static_cast<std::size_t>(j)];
            b[static_cast<std::size_t>(i)] = s / at(i, i);
        }
    }

private:
    double& at(int i, int j) noexcept { return a_[static_cast<std::size_t>(i * n_ + j)]; }
    double at(int i, int j) const noexcept { return a_[static_cast<std::size_t>(i * n_ + j)]; }

    int n_;
    std::vector<double> a_;
    std::vector<int> piv_;
};

struct Integrator {
    int n;
    std::vector<double> g;     // row-major linear conductances (driver branch excluded for saturating)
    std::vector<double> c;     // node capacitances
    std::vector<double> src;   // constant source current vector (ideal step)
    int in;
    DriverModel driver;
    bool nonlinear;

    Integrator(const RcNetwork& net, const DriverModel& d) : driver(d) {
        const NodalSystem sys = assemble_nodal(net);
        n = sys.order();
        in = net.input;
        nonlinear = d.kind == DriverKind::Saturating;
        g.resize(static_cast<std::size_t>(n * n));
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) g[static_cast<std::size_t>(i * n + j)] = sys.g(i, j);
        }
        c.assign(sys.c.data(), sys.c.data() + n);
        src.assign(static_cast<std::size_t>(n), 0.0);
        if (nonlinear) {
            g[static_cast<std::size_t>(in * n + in)] -= sys.input(in);
        } else {
            for (int i = 0; i < n; ++i) src[static_cast<std::size_t>(i)] = sys.input(i) * d.vdd;
        }
    }

    // f(v) = -G v + sources; for the saturating driver also returns df_in/dv_in.
    void rhs(const std::vector<double>& v, std::vector<double>& f, double& dfin) const {
        for (int i = 0; i < n; ++i) {
            double s = src[static_cast<std::size_t>(i)];
            for (int j = 0; j < n; ++j) s -= g[static_cast<std::size_t>(i * n + j)] * v[static_cast<std::size_t>(j)];
            f[static_cast<std::size_t>(i)] = s;
        }
        dfin = 0.0;
        if (nonlinear) {
            const double x = (driver.vdd - v[static_cast<std::size_t>(in)]) / driver.knee;
            const double th = std::tanh(x);
            f[static_cast<std::size_t>(in)] += driver.strength * th;
            dfin = -driver.strength * (1.0 - th * th) / driver.knee;
        }
    }
};

template <typename Sink>
void integrate(const RcNetwork& net, const DriverModel& driver, const SimConfig& cfg, SimStats* stats, Sink&& sink) {
    net.validate();
    driver.validate();
    cfg.validate();
    const Integrator sys(net, driver);
    const int n = sys.n;
    const auto un = static_cast<std::size_t>(n);
    const std::size_t steps = cfg.steps() * static_cast<std::size_t>(cfg.substeps);
    const auto stride = static_cast<std::size_t>(cfg.substeps);
    const double two_over_dt = 2.0 * cfg.substeps / cfg.dt;

    std::vector<double> v(un, 0.0), v_prev(un), f(un), f_prev(un), res(un);
    DenseLu lu(n);
    double dfin = 0.0;
    sys.rhs(v, f_prev, dfin);
    sink(std::size_t{0}, v);

    if (stats) {
        stats->steps = steps;
        stats->newton_iterations = 0;
        stats->max_iterations_per_step = 0;
        stats->residuals.clear();
    }
    for (std::size_t k = 1; k <= steps; ++k) {
        v_prev = v;
        std::vector<double>* history = nullptr;
        if (stats && stats->record_residuals) history = &stats->residuals.emplace_back();
        bool converged = false;
        int it = 0;
        while (it < cfg.newton_max_iter) {
            ++it;
            sys.rhs(v, f, dfin);
            // F(v) = (2C/dt)(v - v_prev) - f(v) - f(v_prev)
            double norm = 0.0;
            for (std::size_t i = 0; i < un; ++i) {
                res[i] = -(two_over_dt * sys.c[i] * (v[i] - v_prev[i]) - f[i] - f_prev[i]);
                norm = std::max(norm, std::abs(res[i]));
            }
            if (history) history->push_back(norm);
            double* a = lu.data();
            for (std::size_t i = 0; i < un * un; ++i) a[i] = sys.g[i];
            for (std::size_t i = 0; i < un; ++i) a[i * un + i] += two_over_dt * sys.c[i];
            a[static_cast<std::size_t>(sys.in) * un + static_cast<std::size_t>(sys.in)] -= dfin;
            lu.factor();
            lu.solve(res);
            double step = 0.0;
            for (std::size_t i = 0; i < un; ++i) {
                v[i] += res[i];
                step = std::max(step, std::abs(res[i]));
            }
            if (!std::isfinite(step)) break;
            if (step <= cfg.newton_tol) {
                converged = true;
                break;
            }
        }
        if (!converged) {
            throw Error(ErrorKind::NewtonDivergence,
                        "Newton failed at step " + std::to_string(k) + " after " + std::to_string(it) + " iterations");
        }
        sys.rhs(v, f_prev, dfin);
        if (stats) {
            stats->newton_iterations += static_cast<std::size_t>(it);
            stats->max_iterations_per_step = std::max(stats->max_iterations_per_step, it);
        }
        if (k % stride == 0) sink(k / stride, v);
    }
}

}  // namespace

Waveform simulate(const RcNetwork& net, const DriverModel& driver, const SimConfig& cfg, SimStats* stats) {
    Waveform w;
    cfg.validate();
    w.times = uniform_grid(cfg.t_end, cfg.dt);
    w.values.resize(w.times.size());
    const auto out = static_cast<std::size_t>(net.output);
    integrate(net, driver, cfg, stats, [&](std::size_t k, const std::vector<double>& v) { w.values[k] = v[out]; });
    return w;
}

std::vector<std::vector<double>> simulate_states(const RcNetwork& net, const DriverModel& driver, const SimConfig& cfg,
                                                 SimStats* stats) {
    std::vector<std::vector<double>> states;
    cfg.validate();
    states.resize(cfg.steps() + 1);
    integrate(net, driver, cfg, stats, [&](std::size_t k, const std::vector<double>& v) { states[k] = v; });
    return states;
}

RuntimeMeasurement measure_runtime(const RcNetwork& net, const DriverModel& driver, const SimConfig& cfg,
                                   int repetitions) {
    if (repetitions < 3) throw Error(ErrorKind::InvalidArgument, "measure_runtime needs at least 3 repetitions");
    using Clock = std::chrono::steady_clock;
    volatile double sink = simulate(net, driver, cfg).values.back();
    std::vector<double> times;
    for (int r = 0; r < repetitions; ++r) {
        const auto t0 = Clock::now();
        sink = simulate(net, driver, cfg).values.back();
        times.push_back(std::chrono::duration<double>(Clock::now() - t0).count());
    }
    (void)sink;
    RuntimeMeasurement m;
    m.repetitions = repetitions;
    for (double t : times) m.mean_seconds += t;
    m.mean_seconds /= repetitions;
    std::sort(times.begin(), times.end());
    m.median_seconds = times[times.size() / 2];
    m.per_step_seconds = m.mean_seconds / static_cast<double>(cfg.steps() * static_cast<std::size_t>(cfg.substeps));
    return m;
}

double measure_newton_solve(const RcNetwork& net, const DriverModel& driver, const SimConfig& cfg, int solves) {
    if (solves < 1) throw Error(ErrorKind::InvalidArgument, "measure_newton_solve needs solves >= 1");
    net.validate();
    driver.validate();
    cfg.validate();
    using Clock = std::chrono::steady_clock;
    const Integrator sys(net, driver);
    const auto un = static_cast<std::size_t>(sys.n);
    const double two_over_dt = 2.0 * cfg.substeps / cfg.dt;
    const std::vector<double> v(un, 0.0);
    std::vector<double> f(un), res(un);
    double dfin = 0.0;
    sys.rhs(v, f, dfin);
    DenseLu lu(sys.n);
    double sink = 0.0;
    auto loop = [&] {
        for (int r = 0; r < solves; ++r) {
            double* a = lu.data();
            for (std::size_t i = 0; i < un * un; ++i) a[i] = sys.g[i];
            for (std::size_t i = 0; i < un; ++i) a[i * un + i] += two_over_dt * sys.c[i];
            a[static_cast<std::size_t>(sys.in) * un + static_cast<std::size_t>(sys.in)] -= dfin;
            lu.factor();
            res = f;
            lu.solve(res);
            sink += res[0];
        }
    };
    loop();
    std::vector<double> times;
    for (int k = 0; k < 5; ++k) {
        const auto t0 = Clock::now();
        loop();
        times.push_back(std::chrono::duration<double>(Clock::now() - t0).count() / solves);
    }
    volatile double keep = sink;
    (void)keep;
    std::sort(times.begin(), times.end());
    return times[2];
}

}  // namespace rcmodal
