// rcmodal: command-line front end for the modal surrogate toolkit.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "rcmodal/bench.hpp"
#include "rcmodal/dataset.hpp"
#include "rcmodal/decomposition.hpp"
#include "rcmodal/error.hpp"
#include "rcmodal/metrics.hpp"
#include "rcmodal/network.hpp"
#include "rcmodal/refsim.hpp"
#include "rcmodal/serialize.hpp"
#include "rcmodal/surrogate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rcmodal;

namespace {

constexpr const char* kOutEnv = "RCMODAL_OUT_DIR";

struct Globals {
    std::uint64_t seed = 1;
    std::string out;
    std::string config;
    json cfg = json::object();
};

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot read " + p.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_text(const fs::path& p, const std::string& text) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + p.string());
    out << text;
}

// Writes to --out when given, stdout otherwise.
void emit(const Globals& g, const std::string& text) {
    if (g.out.empty()) {
        std::cout << text;
    } else {
        write_text(g.out, text);
    }
}

fs::path out_dir(const Globals& g) {
    if (!g.out.empty()) return g.out;
    if (const char* env = std::getenv(kOutEnv)) return env;
    return "rcmodal_out";
}

// "1..9" or "1,2,5".
std::vector<int> parse_orders(const std::string& s) {
    std::vector<int> out;
    try {
        if (const auto dots = s.find(".."); dots != std::string::npos) {
            const int lo = std::stoi(s.substr(0, dots));
            const int hi = std::stoi(s.substr(dots + 2));
            for (int k = lo; k <= hi; ++k) out.push_back(k);
        } else {
            std::stringstream ss(s);
            std::string item;
            while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
        }
    } catch (const std::exception&) {
        throw Error(ErrorKind::InvalidArgument, "bad order list '" + s + "' (use 1..9 or 1,2,3)");
    }
    if (out.empty()) throw Error(ErrorKind::InvalidArgument, "empty order list");
    return out;
}

// Config-file values fill in options the command line left unset.
template <typename T>
void overlay(const Globals& g, const char* section, const char* key, const CLI::Option* opt, T& value) {
    if (opt->count() > 0 || !g.cfg.contains(section) || !g.cfg[section].contains(key)) return;
    try {
        value = g.cfg[section][key].get<T>();
    } catch (const json::exception& e) {
        throw Error(ErrorKind::InvalidArgument, std::string("config ") + section + "." + key + ": " + e.what());
    }
}

struct Inputs {
    std::optional<RcNetwork> network;
    std::optional<TransferFunction> tf;
    std::optional<ModalDecomposition> modes;
};

// Accepts a network, a transfer function, a decomposition or the combined
// netgen document.
Inputs read_inputs(const std::string& path) {
    const std::string text = read_text(path);
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::CorruptFile, path + ": " + e.what());
    }
    Inputs in;
    if (j.contains("network")) {
        in.network = network_from_json(j["network"].dump());
    } else if (j.contains("r")) {
        in.network = network_from_json(text);
    } else if (j.contains("num")) {
        in.tf = transfer_function_from_json(text);
    } else if (j.contains("modes")) {
        in.modes = decomposition_from_json(text);
    } else {
        throw Error(ErrorKind::InvalidArgument, path + " is not a network, transfer function or decomposition");
    }
    if (in.network && !in.tf) in.tf = extract_transfer_function(assemble_nodal(*in.network));
    if (in.tf && !in.modes) in.modes = decompose(*in.tf);
    return in;
}

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    try {
        json j = json::parse(read_text(path));
        if (!j.is_object()) throw Error(ErrorKind::InvalidArgument, "config must be a JSON object");
        return j;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::InvalidArgument, "config " + path + ": " + e.what());
    }
}

std::string file_digest(const fs::path& p) { return hex_digest(read_text(p)); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Modal surrogate for nonlinear-driver RC step responses"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
    app.add_option("--out", g.out,
                   std::string("Output file (single-result commands; default stdout) or directory "
                               "(dataset, train, bench; default $") +
                       kOutEnv + " or ./rcmodal_out)");
    app.add_option("--config", g.config,
                   "JSON config file with \"dataset\", \"train\", \"model\" and \"speed\" sections; "
                   "command-line flags take precedence");

    // netgen
    auto* netgen = app.add_subcommand("netgen", "Generate a random RC network and its transfer function");
    int ng_order = 3;
    std::string ng_topology = "ladder";
    netgen->add_option("--order", ng_order, "Number of capacitors (1-10)")->capture_default_str();
    netgen->add_option("--topology", ng_topology, "ladder or tree")->capture_default_str();

    // decompose
    auto* decompose_cmd = app.add_subcommand("decompose", "Poles, residues and gain-form modes of a system");
    std::string dc_input;
    decompose_cmd->add_option("--input", dc_input, "Network or transfer-function JSON")->required();

    // simulate
    auto* simulate_cmd = app.add_subcommand("simulate", "Newton-Raphson transient of a network, as CSV");
    std::string sim_input;
    std::string sim_driver = "saturating";
    double sim_vdd = 1.1;
    double sim_knee = 0.4;
    SimConfig sim_cfg;
    simulate_cmd->add_option("--input", sim_input, "Network JSON")->required();
    simulate_cmd->add_option("--driver", sim_driver, "ideal_step or saturating")->capture_default_str();
    simulate_cmd->add_option("--vdd", sim_vdd, "Supply voltage")->capture_default_str();
    simulate_cmd->add_option("--knee", sim_knee, "Saturating driver knee voltage")->capture_default_str();
    simulate_cmd->add_option("--t-end", sim_cfg.t_end, "End time (s)")->capture_default_str();
    simulate_cmd->add_option("--dt", sim_cfg.dt, "Output step (s)")->capture_default_str();
    simulate_cmd->add_option("--substeps", sim_cfg.substeps, "Integrator steps per output step")
        ->capture_default_str();

    // dataset build
    auto* dataset_cmd = app.add_subcommand("dataset", "Dataset commands");
    dataset_cmd->require_subcommand(1);
    auto* build_cmd = dataset_cmd->add_subcommand("build", "Generate order-stratified golden waveforms");
    std::string ds_orders = "1..3";
    DatasetConfig ds_cfg;
    std::string ds_driver = "saturating";
    auto* o_ds_orders = build_cmd->add_option("--orders", ds_orders, "Orders, e.g. 1..9")->capture_default_str();
    auto* o_ds_per = build_cmd->add_option("--per-order", ds_cfg.per_order, "Samples per order")->capture_default_str();
    auto* o_ds_driver =
        build_cmd->add_option("--driver", ds_driver, "ideal_step, saturating or mixed")->capture_default_str();
    auto* o_ds_vdd = build_cmd->add_option("--vdd", ds_cfg.vdd, "Supply voltage")->capture_default_str();
    auto* o_ds_knee = build_cmd->add_option("--knee", ds_cfg.knee, "Driver knee voltage")->capture_default_str();
    auto* o_ds_dt = build_cmd->add_option("--dt", ds_cfg.dt, "Grid step (s)")->capture_default_str();
    auto* o_ds_tend = build_cmd->add_option("--t-end", ds_cfg.t_end, "Window (s)")->capture_default_str();

    // train
    auto* train_cmd = app.add_subcommand("train", "Train the base predictor and residual cascade");
    std::string tr_data;
    int tr_modules = 3;
    TrainOptions tr_opt;
    AttentionRegressorConfig model_cfg;
    bool tr_quiet = false;
    auto* o_tr_data = train_cmd->add_option("--data", tr_data, "Dataset directory");
    auto* o_tr_modules = train_cmd->add_option("--modules", tr_modules, "Residual modules (orders 1..N)")
                             ->capture_default_str();
    auto* o_tr_epochs = train_cmd->add_option("--epochs", tr_opt.epochs, "Maximum epochs")->capture_default_str();
    auto* o_tr_patience =
        train_cmd->add_option("--patience", tr_opt.patience, "Early-stopping patience")->capture_default_str();
    auto* o_tr_lr = train_cmd->add_option("--lr", tr_opt.adam.lr, "AdamW learning rate")->capture_default_str();
    auto* o_tr_wd =
        train_cmd->add_option("--weight-decay", tr_opt.adam.weight_decay, "AdamW weight decay")->capture_default_str();
    auto* o_tr_batch =
        train_cmd->add_option("--batch", tr_opt.batch_samples, "Samples per batch")->capture_default_str();
    auto* o_tr_points =
        train_cmd->add_option("--points", tr_opt.points_per_sample, "Time points per sample")->capture_default_str();
    auto* o_width = train_cmd->add_option("--width", model_cfg.model_width, "Model width")->capture_default_str();
    auto* o_heads = train_cmd->add_option("--heads", model_cfg.heads, "Attention heads")->capture_default_str();
    auto* o_ffn = train_cmd->add_option("--ffn", model_cfg.ffn_width, "Feed-forward width")->capture_default_str();
    auto* o_layers = train_cmd->add_option("--layers", model_cfg.encoder_layers,
                                           "Encoder and decoder layers each")->capture_default_str();
    train_cmd->add_flag("--quiet", tr_quiet, "No per-epoch log on stderr");

    // infer
    auto* infer_cmd = app.add_subcommand("infer", "Surrogate step response of a system, as CSV");
    std::string inf_bundle;
    std::string inf_input;
    std::string inf_device = "saturating";
    double inf_tend = 20e-9;
    double inf_dt = 10e-12;
    bool inf_extrapolate = false;
    int inf_threads = 1;
    infer_cmd->add_option("--bundle", inf_bundle, "Trained bundle file")->required();
    infer_cmd->add_option("--input", inf_input, "Network, transfer-function or decomposition JSON")->required();
    infer_cmd->add_option("--device", inf_device, "Driver label: ideal_step or saturating")->capture_default_str();
    infer_cmd->add_option("--t-end", inf_tend, "End time (s)")->capture_default_str();
    infer_cmd->add_option("--dt", inf_dt, "Output step (s)")->capture_default_str();
    infer_cmd->add_flag("--extrapolate", inf_extrapolate, "Reuse the last residual module past the trained order");
    infer_cmd->add_option("--threads", inf_threads, "Concurrent residual evaluations")->capture_default_str();

    // bench
    auto* bench_cmd = app.add_subcommand("bench", "Experiments producing JSON and CSV reports");
    bench_cmd->require_subcommand(1);
    auto* gen_cmd = bench_cmd->add_subcommand("generalize", "R^2 per order for a cascade trained on low orders");
    std::string bg_bundle;
    std::string bg_data;
    std::string bg_orders = "4..9";
    int bg_plots = 1;
    gen_cmd->add_option("--bundle", bg_bundle, "Trained bundle file")->required();
    gen_cmd->add_option("--data", bg_data, "Dataset directory holding the evaluated orders")->required();
    gen_cmd->add_option("--orders", bg_orders, "Evaluated orders")->capture_default_str();
    gen_cmd->add_option("--plots", bg_plots, "Plot CSVs per order (0 disables)")->capture_default_str();

    auto* abl_cmd = bench_cmd->add_subcommand("ablate", "Cascade truncated after 0..N modules on one order");
    std::string ba_bundle;
    std::string ba_data;
    int ba_order = 3;
    abl_cmd->add_option("--bundle", ba_bundle, "Trained bundle file")->required();
    abl_cmd->add_option("--data", ba_data, "Dataset directory")->required();
    abl_cmd->add_option("--order", ba_order, "Evaluated order")->capture_default_str();

    auto* speed_cmd = bench_cmd->add_subcommand("speed", "Oracle vs surrogate wall time per order");
    std::string bs_bundle;
    std::string bs_orders = "1..10";
    SpeedOptions sp;
    speed_cmd->add_option("--bundle", bs_bundle, "Trained bundle file")->required();
    auto* o_sp_orders = speed_cmd->add_option("--orders", bs_orders, "Orders")->capture_default_str();
    auto* o_sp_steps = speed_cmd->add_option("--steps", sp.steps, "Time steps per run")->capture_default_str();
    auto* o_sp_reps = speed_cmd->add_option("--reps", sp.repetitions, "Timed repetitions")->capture_default_str();
    auto* o_sp_tend = speed_cmd->add_option("--t-end", sp.t_end, "Window (s)")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        g.cfg = load_config(g.config);
        if (netgen->parsed()) {
            const RcNetwork net = generate_network(ng_order, parse_topology(ng_topology), g.seed);
            const TransferFunction tf = extract_transfer_function(assemble_nodal(net));
            const json doc{{"version", 1},
                           {"network", json::parse(to_json(net))},
                           {"transfer_function", json::parse(to_json(tf))}};
            emit(g, doc.dump(2) + "\n");
        } else if (decompose_cmd->parsed()) {
            const Inputs in = read_inputs(dc_input);
            json doc = json::parse(to_json(*in.modes));
            try {
                json gains = json::array();
                for (const GainMode& m : to_gain_form(*in.modes)) gains.push_back({{"rate", m.rate}, {"gain", m.gain}});
                doc["gain_form"] = gains;
            } catch (const Error&) {
                doc["gain_form"] = nullptr;  // repeated or complex poles
            }
            emit(g, doc.dump(2) + "\n");
        } else if (simulate_cmd->parsed()) {
            const Inputs in = read_inputs(sim_input);
            if (!in.network) throw Error(ErrorKind::InvalidArgument, "simulate needs a network JSON");
            const DriverKind kind = parse_driver_kind(sim_driver);
            const DriverModel driver = kind == DriverKind::IdealStep ? DriverModel::ideal_step(sim_vdd)
                                                                     : DriverModel::matched(*in.network, sim_vdd, sim_knee);
            const Waveform w = simulate(*in.network, driver, sim_cfg);
            if (g.out.empty()) {
                std::cout << "time_s,voltage_v\n" << std::setprecision(17);
                for (std::size_t k = 0; k < w.size(); ++k) std::cout << w.times[k] << ',' << w.values[k] << '\n';
            } else {
                write_waveform_csv(w, g.out);
            }
        } else if (build_cmd->parsed()) {
            overlay(g, "dataset", "orders", o_ds_orders, ds_orders);
            overlay(g, "dataset", "per_order", o_ds_per, ds_cfg.per_order);
            overlay(g, "dataset", "driver", o_ds_driver, ds_driver);
            overlay(g, "dataset", "vdd", o_ds_vdd, ds_cfg.vdd);
            overlay(g, "dataset", "knee", o_ds_knee, ds_cfg.knee);
            overlay(g, "dataset", "dt", o_ds_dt, ds_cfg.dt);
            overlay(g, "dataset", "t_end", o_ds_tend, ds_cfg.t_end);
            ds_cfg.orders = parse_orders(ds_orders);
            ds_cfg.driver = parse_driver_choice(ds_driver);
            ds_cfg.seed = g.seed;
            const fs::path dir = out_dir(g);
            const Dataset d = build_dataset(ds_cfg, dir);
            std::cerr << "wrote " << d.by_order.size() << " orders to " << dir.string() << '\n';
        } else if (train_cmd->parsed()) {
            overlay(g, "train", "data", o_tr_data, tr_data);
            overlay(g, "train", "modules", o_tr_modules, tr_modules);
            overlay(g, "train", "epochs", o_tr_epochs, tr_opt.epochs);
            overlay(g, "train", "patience", o_tr_patience, tr_opt.patience);
            overlay(g, "train", "lr", o_tr_lr, tr_opt.adam.lr);
            overlay(g, "train", "weight_decay", o_tr_wd, tr_opt.adam.weight_decay);
            overlay(g, "train", "batch", o_tr_batch, tr_opt.batch_samples);
            overlay(g, "train", "points", o_tr_points, tr_opt.points_per_sample);
            overlay(g, "model", "width", o_width, model_cfg.model_width);
            overlay(g, "model", "heads", o_heads, model_cfg.heads);
            overlay(g, "model", "ffn", o_ffn, model_cfg.ffn_width);
            overlay(g, "model", "layers", o_layers, model_cfg.encoder_layers);
            if (tr_data.empty()) throw Error(ErrorKind::InvalidArgument, "train needs --data");
            if (tr_modules < 0) throw Error(ErrorKind::InvalidArgument, "--modules must be >= 0");
            model_cfg.decoder_layers = model_cfg.encoder_layers;
            model_cfg.validate();
            std::vector<int> orders;
            for (int k = 1; k <= std::max(1, tr_modules); ++k) orders.push_back(k);
            const Dataset data = load_dataset(tr_data, orders);
            tr_opt.seed = g.seed;
            if (!tr_quiet) tr_opt.log = [](const std::string& line) { std::cerr << line << '\n'; };
            SurrogateBundle bundle;
            bundle.config = model_cfg;
            (void)train_base(bundle, data, tr_opt);
            train_residual_cascade(bundle, data, tr_modules, tr_opt);
            const fs::path dir = out_dir(g);
            fs::create_directories(dir);
            save_bundle(bundle, dir / "bundle.rcm");
            json logs = json::array();
            for (const ModuleLog& l : bundle.logs) {
                logs.push_back({{"name", l.name},
                                {"order", l.order},
                                {"initial_val_loss", l.initial_val_loss},
                                {"best_epoch", l.best_epoch},
                                {"best_val_loss", l.best_val_loss},
                                {"train_loss", l.train_loss},
                                {"val_loss", l.val_loss}});
            }
            const json report{{"schema_version", kReportSchemaVersion},
                              {"seed", g.seed},
                              {"dataset_manifest", file_digest(fs::path(tr_data) / "manifest.json")},
                              {"bundle", file_digest(dir / "bundle.rcm")},
                              {"parameters_per_module", bundle.base->parameter_count()},
                              {"modules", logs}};
            write_text(dir / "train_log.json", report.dump(2) + "\n");
            std::cerr << "wrote " << (dir / "bundle.rcm").string() << '\n';
        } else if (infer_cmd->parsed()) {
            SurrogateBundle bundle = load_bundle(inf_bundle);
            const Inputs in = read_inputs(inf_input);
            const auto modes = to_gain_form(*in.modes);
            InferOptions io;
            io.allow_extrapolation = inf_extrapolate;
            io.threads = inf_threads;
            const auto times = uniform_grid(inf_tend, inf_dt);
            const Waveform w = infer(bundle, modes, parse_driver_kind(inf_device), times, io);
            if (g.out.empty()) {
                std::cout << "time_s,voltage_v\n" << std::setprecision(17);
                for (std::size_t k = 0; k < w.size(); ++k) std::cout << w.times[k] << ',' << w.values[k] << '\n';
            } else {
                write_waveform_csv(w, g.out);
            }
        } else if (gen_cmd->parsed()) {
            SurrogateBundle bundle = load_bundle(bg_bundle);
            GeneralizationOptions opt;
            opt.orders = parse_orders(bg_orders);
            const Dataset data = load_dataset(bg_data, opt.orders);
            GeneralizationReport r = run_generalization_experiment(bundle, data, opt);
            r.provenance = {{"bundle", file_digest(bg_bundle)},
                            {"dataset_manifest", file_digest(fs::path(bg_data) / "manifest.json")},
                            {"dataset_seed", std::to_string(data.manifest.config.seed)},
                            {"train_seed", std::to_string(bundle.seed)},
                            {"split", "test"}};
            const fs::path dir = out_dir(g);
            write_text(dir / "generalization.json", to_json(r) + "\n");
            write_csv(r, dir / "generalization.csv");
            if (bg_plots > 0) (void)emit_plots(bundle, data, opt.orders, dir / "plots", bg_plots);
            for (const auto& row : r.rows) std::cout << "order " << row.order << " R^2 " << row.r2 << '\n';
        } else if (abl_cmd->parsed()) {
            SurrogateBundle bundle = load_bundle(ba_bundle);
            const std::vector<int> orders{ba_order};
            const Dataset data = load_dataset(ba_data, orders);
            AblationReport r = run_ablation_experiment(bundle, data, ba_order);
            r.provenance = {{"bundle", file_digest(ba_bundle)},
                            {"dataset_manifest", file_digest(fs::path(ba_data) / "manifest.json")}};
            const fs::path dir = out_dir(g);
            write_text(dir / "ablation.json", to_json(r) + "\n");
            write_csv(r, dir / "ablation.csv");
            for (const auto& row : r.test) std::cout << row.modules_used << " modules R^2 " << row.r2 << '\n';
        } else if (speed_cmd->parsed()) {
            overlay(g, "speed", "orders", o_sp_orders, bs_orders);
            overlay(g, "speed", "steps", o_sp_steps, sp.steps);
            overlay(g, "speed", "reps", o_sp_reps, sp.repetitions);
            overlay(g, "speed", "t_end", o_sp_tend, sp.t_end);
            SurrogateBundle bundle = load_bundle(bs_bundle);
            sp.orders = parse_orders(bs_orders);
            sp.seed = g.seed;
            SpeedReport r = run_speed_experiment(bundle, sp);
            r.provenance = {{"bundle", file_digest(bs_bundle)}, {"seed", std::to_string(g.seed)}};
            const fs::path dir = out_dir(g);
            write_text(dir / "speed.json", to_json(r) + "\n");
            write_csv(r, dir / "speed.csv");
            for (const auto& row : r.rows) std::cout << "order " << row.order << " speedup " << row.speedup << '\n';
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.is_validation() ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
