#include "rcmodal/bench.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "rcmodal/decomposition.hpp"
#include "rcmodal/error.hpp"
#include "rcmodal/metrics.hpp"
#include "rcmodal/network.hpp"
#include "rcmodal/refsim.hpp"
#include "rcmodal/rng.hpp"

namespace rcmodal {

using nlohmann::json;

OrderAccuracy evaluate_order(SurrogateBundle& bundle, const Dataset& data, int order, Split split, int modules,
                             int threads) {
    const auto samples = data.select(order, split);
    if (samples.empty()) {
        throw Error(ErrorKind::MissingOrderDataset, "no " + std::string(to_string(split)) + " samples of order " +
                                                        std::to_string(order));
    }
    InferOptions io;
    io.allow_extrapolation = true;
    io.threads = threads;
    io.max_modules = modules;
    OrderAccuracy acc;
    acc.order = order;
    acc.samples = static_cast<int>(samples.size());
    acc.r2_min = 1.0;
    acc.modules_used = modules < 0 ? order : std::min(modules, order);
    std::vector<double> all_pred;
    std::vector<double> all_gold;
    double se = 0.0;
    for (const Sample* s : samples) {
        const std::vector<double> p = predict_sample(bundle, data, *s, io);
        const double r2 = r_squared(p, s->target);
        acc.r2 += r2;
        acc.r2_min = std::min(acc.r2_min, r2);
        se += mean_squared_error(p, s->target) * static_cast<double>(p.size());
        acc.max_abs_error = std::max(acc.max_abs_error, max_abs_error(p, s->target));
        all_pred.insert(all_pred.end(), p.begin(), p.end());
        all_gold.insert(all_gold.end(), s->target.begin(), s->target.end());
    }
    acc.r2 /= static_cast<double>(samples.size());
    acc.r2_pooled = r_squared(all_pred, all_gold);
    acc.mse = se / static_cast<double>(all_gold.size());
    return acc;
}

GeneralizationReport run_generalization_experiment(SurrogateBundle& bundle, const Dataset& data,
                                                   const GeneralizationOptions& opt) {
    GeneralizationReport r;
    r.trained_modules = static_cast<int>(bundle.residuals.size());
    for (int order : opt.orders) {
        r.rows.push_back(evaluate_order(bundle, data, order, opt.split, -1, opt.threads));
        r.coverage.push_back(coverage_fraction(opt.coverage_states, order));
    }
    return r;
}

AblationReport run_ablation_experiment(SurrogateBundle& bundle, const Dataset& data, int order) {
    AblationReport r;
    r.order = order;
    const int k_max = std::min(order, static_cast<int>(bundle.residuals.size()));
    for (int k = 0; k <= k_max; ++k) {
        r.test.push_back(evaluate_order(bundle, data, order, Split::Test, k));
        r.val.push_back(evaluate_order(bundle, data, order, Split::Val, k));
    }
    for (const ModuleLog& log : bundle.logs) {
        if (log.name == "base") continue;
        r.modules.push_back({log.name, log.order, log.initial_val_loss, log.best_val_loss});
    }
    return r;
}

RcNetwork speed_network(int order, const SpeedOptions& opt) {
    const RcNetwork net = generate_network(order, opt.topology, mix_seed(opt.seed, static_cast<std::uint64_t>(order)));
    const auto modes = to_gain_form(decompose(extract_transfer_function(assemble_nodal(net))));
    double p_min = modes.front().rate;
    for (const GainMode& m : modes) p_min = std::min(p_min, m.rate);
    return net.scaled_resistance(opt.t_end / 15.0 * p_min);
}

namespace {

using Clock = std::chrono::steady_clock;

template <typename F>
double median_seconds(int reps, F&& f) {
    f();  // warm-up
    std::vector<double> t;
    for (int i = 0; i < reps; ++i) {
        const auto t0 = Clock::now();
        f();
        t.push_back(std::chrono::duration<double>(Clock::now() - t0).count());
    }
    std::sort(t.begin(), t.end());
    const std::size_t n = t.size();
    return n % 2 ? t[n / 2] : 0.5 * (t[n / 2 - 1] + t[n / 2]);
}

}  // namespace

SpeedReport run_speed_experiment(SurrogateBundle& bundle, const SpeedOptions& opt) {
    if (opt.steps < 1 || opt.repetitions < 3 || !(opt.t_end > 0.0)) {
        throw Error(ErrorKind::InvalidArgument, "speed experiment needs steps >= 1, repetitions >= 3, t_end > 0");
    }
    SpeedReport r;
    r.machine = machine_descriptor();
    SimConfig cfg;
    cfg.t_end = opt.t_end;
    cfg.dt = opt.t_end / opt.steps;
    const std::vector<double> times = uniform_grid(cfg.t_end, cfg.dt);
    InferOptions io;
    io.allow_extrapolation = true;
    std::vector<double> orders;
    std::vector<double> step_times;
    std::vector<double> solve_times;
    std::vector<double> surrogate_times_s;
    for (int order : opt.orders) {
        const RcNetwork net = speed_network(order, opt);
        const DriverModel driver = DriverModel::matched(net, opt.vdd, opt.knee);
        SpeedRow row;
        row.order = order;
        SimStats stats;
        (void)simulate(net, driver, cfg, &stats);
        row.steps = static_cast<int>(stats.steps);
        row.newton_iterations = static_cast<long>(stats.newton_iterations);
        row.oracle_seconds = median_seconds(opt.repetitions, [&] { (void)simulate(net, driver, cfg); });
        row.oracle_per_step = row.oracle_seconds / static_cast<double>(stats.steps);
        row.solve_seconds = measure_newton_solve(net, driver, cfg);
        row.solve_per_step =
            row.solve_seconds * static_cast<double>(stats.newton_iterations) / static_cast<double>(stats.steps);

        std::vector<GainMode> modes;
        row.decompose_seconds = median_seconds(opt.repetitions, [&] {
            modes = to_gain_form(decompose(extract_transfer_function(assemble_nodal(net))));
        });
        InferStats is;
        (void)infer(bundle, modes, DriverKind::Saturating, times, io, &is);
        row.evaluations = static_cast<int>(is.base_evaluations + is.residual_evaluations);
        row.surrogate_seconds = median_seconds(opt.repetitions, [&] {
            (void)infer(bundle, modes, DriverKind::Saturating, times, io);
        });
        row.speedup = row.oracle_seconds / row.surrogate_seconds;
        r.rows.push_back(row);
        if (order >= 2) {
            orders.push_back(order);
            step_times.push_back(row.oracle_per_step);
            solve_times.push_back(row.solve_per_step);
            surrogate_times_s.push_back(row.surrogate_seconds);
        }
    }
    if (orders.size() >= 2) {
        r.oracle_step_slope = loglog_slope(orders, step_times);
        r.solve_step_slope = loglog_slope(orders, solve_times);
        r.surrogate_slope = loglog_slope(orders, surrogate_times_s);
    }
    return r;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

json accuracy_json(const OrderAccuracy& a) {
    return {{"order", a.order},     {"samples", a.samples}, {"r2", a.r2},
            {"r2_pooled", a.r2_pooled}, {"r2_min", a.r2_min}, {"mse", a.mse},
            {"max_abs_error", a.max_abs_error}, {"modules_used", a.modules_used}};
}

json provenance_json(const std::map<std::string, std::string>& p) {
    json j = json::object();
    for (const auto& [k, v] : p) j[k] = v;
    return j;
}

std::ofstream open_csv(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    out << std::setprecision(17);
    return out;
}

void accuracy_row(std::ostream& out, const OrderAccuracy& a) {
    out << a.order << ',' << a.samples << ',' << a.modules_used << ',' << a.r2 << ',' << a.r2_pooled << ','
        << a.r2_min << ',' << a.mse << ',' << a.max_abs_error;
}

constexpr const char* kAccuracyHeader = "order,samples,modules_used,r2,r2_pooled,r2_min,mse,max_abs_error";

}  // namespace

std::string to_json(const GeneralizationReport& r) {
    json rows = json::array();
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
        json row = accuracy_json(r.rows[i]);
        row["coverage_fraction"] = r.coverage[i];
        rows.push_back(row);
    }
    return json{{"schema_version", kReportSchemaVersion},
                {"experiment", "generalization"},
                {"trained_modules", r.trained_modules},
                {"rows", rows},
                {"provenance", provenance_json(r.provenance)}}
        .dump(2);
}

std::string to_json(const AblationReport& r) {
    json test = json::array();
    json val = json::array();
    for (const auto& a : r.test) test.push_back(accuracy_json(a));
    for (const auto& a : r.val) val.push_back(accuracy_json(a));
    json modules = json::array();
    for (const auto& m : r.modules) {
        modules.push_back({{"name", m.name},
                           {"order", m.order},
                           {"val_mse_before", m.mse_before},
                           {"val_mse_after", m.mse_after}});
    }
    return json{{"schema_version", kReportSchemaVersion},
                {"experiment", "ablation"},
                {"order", r.order},
                {"test", test},
                {"val", val},
                {"modules", modules},
                {"provenance", provenance_json(r.provenance)}}
        .dump(2);
}

std::string to_json(const SpeedReport& r) {
    json rows = json::array();
    for (const SpeedRow& s : r.rows) {
        rows.push_back({{"order", s.order},
                        {"steps", s.steps},
                        {"newton_iterations", s.newton_iterations},
                        {"surrogate_evaluations", s.evaluations},
                        {"timing",
                         {{"oracle_seconds", s.oracle_seconds},
                          {"oracle_per_step_seconds", s.oracle_per_step},
                          {"solve_seconds", s.solve_seconds},
                          {"solve_per_step_seconds", s.solve_per_step},
                          {"surrogate_seconds", s.surrogate_seconds},
                          {"decompose_seconds", s.decompose_seconds},
                          {"speedup", s.speedup}}}});
    }
    return json{{"schema_version", kReportSchemaVersion},
                {"experiment", "speed"},
                {"rows", rows},
                {"timing",
                 {{"oracle_step_slope", r.oracle_step_slope},
                  {"solve_step_slope", r.solve_step_slope},
                  {"surrogate_slope", r.surrogate_slope},
                  {"machine", r.machine}}},
                {"provenance", provenance_json(r.provenance)}}
        .dump(2);
}

void write_csv(const GeneralizationReport& r, const std::filesystem::path& path) {
    auto out = open_csv(path);
    out << kAccuracyHeader << ",coverage_fraction\n";
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
        accuracy_row(out, r.rows[i]);
        out << ',' << r.coverage[i] << '\n';
    }
}

void write_csv(const AblationReport& r, const std::filesystem::path& path) {
    auto out = open_csv(path);
    out << "split," << kAccuracyHeader << '\n';
    for (const auto& a : r.test) {
        out << "test,";
        accuracy_row(out, a);
        out << '\n';
    }
    for (const auto& a : r.val) {
        out << "val,";
        accuracy_row(out, a);
        out << '\n';
    }
}

void write_csv(const SpeedReport& r, const std::filesystem::path& path) {
    auto out = open_csv(path);
    out << "order,steps,newton_iterations,surrogate_evaluations,oracle_seconds,oracle_per_step_seconds,"
           "solve_seconds,solve_per_step_seconds,surrogate_seconds,decompose_seconds,speedup\n";
    for (const SpeedRow& s : r.rows) {
        out << s.order << ',' << s.steps << ',' << s.newton_iterations << ',' << s.evaluations << ','
            << s.oracle_seconds << ',' << s.oracle_per_step << ',' << s.solve_seconds << ',' << s.solve_per_step
            << ',' << s.surrogate_seconds << ','
            << s.decompose_seconds << ',' << s.speedup << '\n';
    }
}

std::vector<std::filesystem::path> emit_plots(SurrogateBundle& bundle, const Dataset& data,
                                              const std::vector<int>& orders, const std::filesystem::path& dir,
                                              int per_order) {
    std::vector<std::filesystem::path> written;
    const std::vector<double> times = data.times();
    InferOptions io;
    io.allow_extrapolation = true;
    for (int order : orders) {
        const auto samples = data.select(order, Split::Test);
        for (int i = 0; i < per_order && i < static_cast<int>(samples.size()); ++i) {
            const Sample& s = *samples[static_cast<std::size_t>(i)];
            const std::vector<double> p = predict_sample(bundle, data, s, io);
            const auto golden = denormalize_waveform(s.target, s.v_min, s.v_max);
            const auto predicted = denormalize_waveform(p, s.v_min, s.v_max);
            const auto path = dir / ("plot_order_" + std::to_string(order) + "_" + std::to_string(s.index) + ".csv");
            auto out = open_csv(path);
            out << "time_s,golden_v,predicted_v\n";
            for (std::size_t k = 0; k < times.size(); ++k) {
                out << times[k] << ',' << golden[k] << ',' << predicted[k] << '\n';
            }
            written.push_back(path);
        }
    }
    return written;
}

std::string machine_descriptor() {
    std::string cpu = "unknown cpu";
    std::ifstream info("/proc/cpuinfo");
    std::string line;
    while (std::getline(info, line)) {
        if (line.rfind("model name", 0) == 0) {
            cpu = line.substr(line.find(':') + 2);
            break;
        }
    }
    std::ostringstream out;
    out << cpu << "; " << std::thread::hardware_concurrency() << " hardware threads; single worker";
    return out.str();
}

}  // namespace rcmodal
