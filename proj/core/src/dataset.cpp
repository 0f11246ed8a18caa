#include "rcmodal/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include <json.hpp>

#include "rcmodal/error.hpp"
#include "rcmodal/rng.hpp"
#include "rcmodal/serialize.hpp"

namespace rcmodal {

using nlohmann::json;

NormalizedWaveform normalize_waveform(std::span<const double> values) {
    if (values.empty()) throw Error(ErrorKind::DegenerateWaveform, "empty waveform");
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    NormalizedWaveform out{{}, *lo, *hi};
    const double range = out.v_max - out.v_min;
    if (!(range >= 1e-12)) throw Error(ErrorKind::DegenerateWaveform, "waveform range below 1e-12");
    out.values.reserve(values.size());
    for (double v : values) out.values.push_back((v - out.v_min) / range);
    return out;
}

std::vector<double> denormalize_waveform(std::span<const double> normalized, double v_min, double v_max) {
    std::vector<double> out;
    out.reserve(normalized.size());
    for (double x : normalized) out.push_back(v_min + x * (v_max - v_min));
    return out;
}

std::vector<double> normalize_times(std::span<const double> times, double mu_t, double sigma_t) {
    if (!(sigma_t > 0.0)) throw Error(ErrorKind::InvalidArgument, "sigma_t must be positive");
    std::vector<double> out;
    out.reserve(times.size());
    for (double t : times) {
        if (!(t > 0.0)) throw Error(ErrorKind::NonPositiveTime, "log-time needs t > 0");
        out.push_back((std::log10(t) - mu_t) / sigma_t);
    }
    return out;
}

NormalizedModes normalize_modes(std::span<const GainMode> modes) {
    if (modes.empty()) throw Error(ErrorKind::EmptyModes, "no modes to normalize");
    NormalizedModes out;
    for (const GainMode& m : modes) {
        if (!(m.rate > 0.0) || !std::isfinite(m.rate) || !std::isfinite(m.gain)) {
            throw Error(ErrorKind::InvalidArgument, "modes need positive finite rates and finite gains");
        }
        out.p_max = std::max(out.p_max, m.rate);
        out.a_max = std::max(out.a_max, std::abs(m.gain));
    }
    if (!(out.a_max > 0.0)) throw Error(ErrorKind::InvalidArgument, "all gains are zero");
    for (const GainMode& m : modes) out.modes.push_back({m.rate / out.p_max, m.gain / out.a_max});
    std::stable_sort(out.modes.begin(), out.modes.end(), [](const NormalizedMode& x, const NormalizedMode& y) {
        if (std::abs(x.a) != std::abs(y.a)) return std::abs(x.a) > std::abs(y.a);
        return x.p > y.p;
    });
    return out;
}

std::string_view to_string(Split s) noexcept {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "train";
}

DriverChoice parse_driver_choice(std::string_view s) {
    if (s == "ideal_step") return DriverChoice::IdealStep;
    if (s == "saturating") return DriverChoice::Saturating;
    if (s == "mixed") return DriverChoice::Mixed;
    throw Error(ErrorKind::InvalidArgument, "unknown driver '" + std::string(s) + "'");
}

std::string_view to_string(DriverChoice c) noexcept {
    switch (c) {
        case DriverChoice::IdealStep: return "ideal_step";
        case DriverChoice::Saturating: return "saturating";
        case DriverChoice::Mixed: return "mixed";
    }
    return "saturating";
}

void DatasetConfig::validate() const {
    if (orders.empty()) throw Error(ErrorKind::InvalidArgument, "no orders requested");
    for (int n : orders) {
        if (n < 1 || n > 10) throw Error(ErrorKind::UnsupportedOrder, "order " + std::to_string(n) + " outside 1..10");
    }
    if (per_order < 1) throw Error(ErrorKind::InvalidArgument, "per_order must be >= 1");
    if (!(vdd > 0.0) || !(knee > 0.0) || !(dt > 0.0) || !(t_end > dt) || !(tau_lo_steps > 0.0) ||
        !(tau_hi_divisor > 0.0) || tau_lo_steps * dt >= t_end / tau_hi_divisor || max_substeps < 1) {
        throw Error(ErrorKind::InvalidArgument, "inconsistent dataset configuration");
    }
}

std::vector<double> Dataset::times() const { return uniform_grid(manifest.config.t_end, manifest.config.dt); }

std::vector<double> Dataset::sample_times(const Sample& s) const {
    std::vector<double> t = times();
    t[0] = manifest.config.dt / 2.0;
    for (double& x : t) x *= s.p_max;
    return normalize_times(t, manifest.mu_t, manifest.sigma_t);
}

std::vector<const Sample*> Dataset::select(int order, Split split) const {
    std::vector<const Sample*> out;
    const auto it = by_order.find(order);
    if (it == by_order.end()) return out;
    for (const Sample& s : it->second) {
        if (s.split == split) out.push_back(&s);
    }
    return out;
}

namespace {

Split split_of(int index, int count) {
    if (index < (count * 8) / 10) return Split::Train;
    if (index < (count * 9) / 10) return Split::Val;
    return Split::Test;
}

struct Draw {
    Sample sample;
    double deviation = 0.0;
};

// One attempt; throws on any condition that requires a redraw.
Draw draw_sample(const DatasetConfig& cfg, int order, int index, Rng& rng) {
    Draw d;
    Sample& s = d.sample;
    s.order = order;
    s.index = index;
    s.split = split_of(index, cfg.per_order);
    switch (cfg.driver) {
        case DriverChoice::IdealStep: s.device = DriverKind::IdealStep; break;
        case DriverChoice::Saturating: s.device = DriverKind::Saturating; break;
        case DriverChoice::Mixed: s.device = index % 2 == 0 ? DriverKind::Saturating : DriverKind::IdealStep; break;
    }
    const Topology topology = (index % 2 == 0) ? Topology::Ladder : Topology::Tree;
    const std::uint64_t net_seed = rng();
    const double tau = log_uniform(rng, cfg.tau_lo_steps * cfg.dt, cfg.t_end / cfg.tau_hi_divisor);

    RcNetwork net = generate_network(order, topology, net_seed, cfg.netgen);
    std::vector<GainMode> gains = to_gain_form(decompose(tree_transfer_function(net)));
    double p_min = gains.front().rate;
    for (const GainMode& g : gains) p_min = std::min(p_min, g.rate);
    const double k = tau * p_min;  // scaling R by k scales every time constant by k
    s.network = net.scaled_resistance(k);
    for (GainMode& g : gains) g.rate /= k;

    const NormalizedModes nm = normalize_modes(gains);
    s.modes = nm.modes;
    s.p_max = nm.p_max;
    s.a_max = nm.a_max;
    for (const NormalizedMode& m : s.modes) s.gains.push_back({m.p * nm.p_max, m.a * nm.a_max});

    SimConfig sim;
    sim.dt = cfg.dt;
    sim.t_end = cfg.t_end;
    sim.substeps = static_cast<int>(std::clamp(std::ceil(cfg.dt * s.p_max / 8.0), 1.0, double(cfg.max_substeps)));
    s.substeps = sim.substeps;
    const DriverModel driver = s.device == DriverKind::IdealStep ? DriverModel::ideal_step(cfg.vdd)
                                                                  : DriverModel::matched(s.network, cfg.vdd, cfg.knee);
    const Waveform golden = simulate(s.network, driver, sim);
    if (std::abs(golden.values.back() - cfg.vdd) > 1e-3 * cfg.vdd) {
        throw Error(ErrorKind::DegenerateWaveform, "golden did not settle");
    }
    const NormalizedWaveform nw = normalize_waveform(golden.values);
    s.target = nw.values;
    s.v_min = nw.v_min;
    s.v_max = nw.v_max;

    const Waveform linear = analytic_step_response(s.gains, golden.times, cfg.vdd);
    for (std::size_t i = 0; i < golden.size(); ++i) {
        d.deviation = std::max(d.deviation, std::abs(golden.values[i] - linear.values[i]) / cfg.vdd);
    }
    return d;
}

json config_to_json(const DatasetConfig& c) {
    return {{"orders", c.orders},
            {"per_order", c.per_order},
            {"seed", c.seed},
            {"driver", std::string(to_string(c.driver))},
            {"vdd", c.vdd},
            {"knee", c.knee},
            {"dt", c.dt},
            {"t_end", c.t_end},
            {"tau_lo_steps", c.tau_lo_steps},
            {"tau_hi_divisor", c.tau_hi_divisor},
            {"max_substeps", c.max_substeps},
            {"r_min", c.netgen.r_min},
            {"r_max", c.netgen.r_max},
            {"c_min", c.netgen.c_min},
            {"c_max", c.netgen.c_max}};
}

DatasetConfig config_from_json(const json& j) {
    DatasetConfig c;
    c.orders = j.at("orders").get<std::vector<int>>();
    c.per_order = j.at("per_order");
    c.seed = j.at("seed");
    c.driver = parse_driver_choice(j.at("driver").get<std::string>());
    c.vdd = j.at("vdd");
    c.knee = j.at("knee");
    c.dt = j.at("dt");
    c.t_end = j.at("t_end");
    c.tau_lo_steps = j.at("tau_lo_steps");
    c.tau_hi_divisor = j.at("tau_hi_divisor");
    c.max_substeps = j.at("max_substeps");
    c.netgen.r_min = j.at("r_min");
    c.netgen.r_max = j.at("r_max");
    c.netgen.c_min = j.at("c_min");
    c.netgen.c_max = j.at("c_max");
    return c;
}

template <typename V>
json keyed(const std::map<int, V>& m) {
    json j = json::object();
    for (const auto& [k, v] : m) j[std::to_string(k)] = v;
    return j;
}

template <typename V>
std::map<int, V> unkeyed(const json& j) {
    std::map<int, V> m;
    for (const auto& [k, v] : j.items()) m[std::stoi(k)] = v.template get<V>();
    return m;
}

json sample_to_json(const Sample& s) {
    json modes = json::array();
    for (const NormalizedMode& m : s.modes) modes.push_back({m.p, m.a});
    json gains = json::array();
    for (const GainMode& g : s.gains) gains.push_back({g.rate, g.gain});
    return {{"order", s.order},
            {"index", s.index},
            {"split", std::string(to_string(s.split))},
            {"device", static_cast<int>(s.device)},
            {"network", json::parse(to_json(s.network))},
            {"gains", gains},
            {"modes", modes},
            {"p_max", s.p_max},
            {"a_max", s.a_max},
            {"v_min", s.v_min},
            {"v_max", s.v_max},
            {"substeps", s.substeps},
            {"target", s.target}};
}

Sample sample_from_json(const json& j) {
    Sample s;
    s.order = j.at("order");
    s.index = j.at("index");
    const std::string split = j.at("split");
    s.split = split == "train" ? Split::Train : split == "val" ? Split::Val : Split::Test;
    s.device = static_cast<DriverKind>(j.at("device").get<int>());
    s.network = network_from_json(j.at("network").dump());
    for (const json& g : j.at("gains")) s.gains.push_back({g.at(0), g.at(1)});
    for (const json& m : j.at("modes")) s.modes.push_back({m.at(0), m.at(1)});
    s.p_max = j.at("p_max");
    s.a_max = j.at("a_max");
    s.v_min = j.at("v_min");
    s.v_max = j.at("v_max");
    s.substeps = j.at("substeps");
    s.target = j.at("target").get<std::vector<double>>();
    if (static_cast<int>(s.modes.size()) != s.order || s.gains.size() != s.modes.size()) {
        throw Error(ErrorKind::CorruptFile, "sample mode count does not match its order");
    }
    return s;
}

}  // namespace

Dataset generate_dataset(const DatasetConfig& cfg) {
    cfg.validate();
    Dataset d;
    d.manifest.config = cfg;
    constexpr int kMaxAttempts = 1000;
    for (int order : cfg.orders) {
        auto& samples = d.by_order[order];
        int resampled = 0;
        double deviation = 0.0;
        for (int index = 0; index < cfg.per_order; ++index) {
            Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(order), static_cast<std::uint64_t>(index)));
            for (int attempt = 0;; ++attempt) {
                if (attempt == kMaxAttempts) {
                    throw Error(ErrorKind::NonConvergence, "could not draw a valid sample of order " + std::to_string(order));
                }
                try {
                    Draw draw = draw_sample(cfg, order, index, rng);
                    deviation += draw.deviation;
                    samples.push_back(std::move(draw.sample));
                    break;
                } catch (const Error& e) {
                    if (e.kind() == ErrorKind::InvalidArgument) throw;
                    ++resampled;
                }
            }
        }
        d.manifest.counts[order] = cfg.per_order;
        d.manifest.resampled[order] = resampled;
        d.manifest.nonlinear_deviation[order] = deviation / cfg.per_order;
    }

    // Second pass: log-time statistics over every grid point of the training split.
    const std::vector<double> grid = d.times();
    double sum = 0.0;
    std::size_t count = 0;
    auto log_time = [&](std::size_t k, double p_max) {
        return std::log10((k == 0 ? cfg.dt / 2.0 : grid[k]) * p_max);
    };
    for (const auto& [order, samples] : d.by_order) {
        for (const Sample& s : samples) {
            if (s.split != Split::Train) continue;
            for (std::size_t k = 0; k < grid.size(); ++k) sum += log_time(k, s.p_max);
            count += grid.size();
        }
    }
    if (count == 0) throw Error(ErrorKind::InvalidArgument, "dataset has no training samples");
    const double mean = sum / static_cast<double>(count);
    double ss = 0.0;
    for (const auto& [order, samples] : d.by_order) {
        for (const Sample& s : samples) {
            if (s.split != Split::Train) continue;
            for (std::size_t k = 0; k < grid.size(); ++k) ss += std::pow(log_time(k, s.p_max) - mean, 2);
        }
    }
    d.manifest.mu_t = mean;
    d.manifest.sigma_t = std::sqrt(ss / static_cast<double>(count));
    return d;
}

void write_dataset(const Dataset& d, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    json files = json::object();
    for (const auto& [order, samples] : d.by_order) {
        const std::string name = "order_" + std::to_string(order) + ".ndjson";
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw Error(ErrorKind::Io, "cannot write " + (dir / name).string());
        for (const Sample& s : samples) out << sample_to_json(s).dump() << '\n';
        files[std::to_string(order)] = name;
    }
    const DatasetManifest& m = d.manifest;
    json manifest{{"format_version", m.format_version},
                  {"config", config_to_json(m.config)},
                  {"mu_t", m.mu_t},
                  {"sigma_t", m.sigma_t},
                  {"points", d.times().size()},
                  {"counts", keyed(m.counts)},
                  {"resampled", keyed(m.resampled)},
                  {"nonlinear_deviation", keyed(m.nonlinear_deviation)},
                  {"split", {{"train", 0.8}, {"val", 0.1}, {"test", 0.1}}},
                  {"files", files}};
    std::ofstream out(dir / "manifest.json", std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + (dir / "manifest.json").string());
    out << manifest.dump(2) << '\n';
}

Dataset load_dataset(const std::filesystem::path& dir, std::span<const int> orders) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw Error(ErrorKind::Io, "cannot read " + (dir / "manifest.json").string());
    Dataset d;
    try {
        const json m = json::parse(in);
        if (m.at("format_version") != 1) throw Error(ErrorKind::VersionMismatch, "unsupported dataset format");
        d.manifest.config = config_from_json(m.at("config"));
        d.manifest.mu_t = m.at("mu_t");
        d.manifest.sigma_t = m.at("sigma_t");
        d.manifest.counts = unkeyed<int>(m.at("counts"));
        d.manifest.resampled = unkeyed<int>(m.at("resampled"));
        d.manifest.nonlinear_deviation = unkeyed<double>(m.at("nonlinear_deviation"));
        std::vector<int> wanted(orders.begin(), orders.end());
        if (wanted.empty()) {
            for (const auto& [order, n] : d.manifest.counts) wanted.push_back(order);
        }
        for (int order : wanted) {
            if (!d.manifest.counts.contains(order)) {
                throw Error(ErrorKind::MissingOrderDataset, "dataset has no order " + std::to_string(order));
            }
            const auto path = dir / ("order_" + std::to_string(order) + ".ndjson");
            std::ifstream f(path);
            if (!f) throw Error(ErrorKind::MissingOrderDataset, "missing " + path.string());
            auto& samples = d.by_order[order];
            std::string line;
            while (std::getline(f, line)) {
                if (!line.empty()) samples.push_back(sample_from_json(json::parse(line)));
            }
            if (static_cast<int>(samples.size()) != d.manifest.counts[order]) {
                throw Error(ErrorKind::CorruptFile, path.string() + " sample count differs from manifest");
            }
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::CorruptFile, e.what());
    }
    return d;
}

Dataset build_dataset(const DatasetConfig& cfg, const std::filesystem::path& dir) {
    Dataset d = generate_dataset(cfg);
    write_dataset(d, dir);
    return d;
}

}  // namespace rcmodal
