#include "rcmodal/surrogate.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <future>
#include <sstream>

#include <json.hpp>

#include "rcmodal/error.hpp"
#include "rcmodal/metrics.hpp"

namespace rcmodal {

using ag::Tape;
using ag::Var;
using nlohmann::json;

void AttentionRegressorConfig::validate() const {
    if (encoder_layers < 1 || decoder_layers < 1 || model_width < 2 || heads < 1 || model_width % heads != 0 ||
        ffn_width < 1 || max_index < 1 || !(init_std > 0.0) || !(time_f_lo > 0.0) || !(time_f_hi >= time_f_lo)) {
        throw Error(ErrorKind::InvalidArgument, "invalid regressor configuration (width must divide by heads)");
    }
}

void QueryBatch::validate(TokenLayout layout) const {
    const Eigen::Index features = layout == TokenLayout::Base ? 2 : 4;
    const bool ok = groups > 0 && tq > 0 && device.size() == static_cast<std::size_t>(groups) &&
                    (layout == TokenLayout::Base || index.size() == static_cast<std::size_t>(groups)) &&
                    modes.rows() == groups && modes.cols() == features && times.rows() == Eigen::Index{groups} * tq &&
                    times.cols() == 1;
    if (!ok) throw Error(ErrorKind::ShapeMismatch, "query batch shapes are inconsistent");
    for (int d : device) {
        if (d < 0 || d > 1) throw Error(ErrorKind::ShapeMismatch, "device label must be 0 or 1");
    }
}

AttentionRegressor::AttentionRegressor(const AttentionRegressorConfig& cfg, TokenLayout layout, std::uint64_t seed)
    : cfg_(cfg), layout_(layout) {
    cfg_.validate();
    Rng rng(mix_seed(seed, 0x5eed));
    const int w = cfg_.model_width;
    const double sd = cfg_.init_std;
    device_ = nn::Embedding(ps_, "device", 2, w, rng, sd);
    if (layout_ == TokenLayout::Residual) index_ = nn::Embedding(ps_, "index", cfg_.max_index, w, rng, sd);
    mode_in_ = nn::Linear(ps_, "mode_in", 2, w, rng, sd);
    time_in_ = nn::Linear(ps_, "time_in", 1, w, rng, sd);
    for (int i = 0; i < cfg_.encoder_layers; ++i) {
        encoder_.emplace_back(ps_, "enc" + std::to_string(i), w, cfg_.heads, cfg_.ffn_width, rng, sd);
    }
    encoder_norm_ = nn::LayerNorm(ps_, "enc_norm", w);
    for (int i = 0; i < cfg_.decoder_layers; ++i) {
        decoder_.emplace_back(ps_, "dec" + std::to_string(i), w, cfg_.heads, cfg_.ffn_width, rng, sd);
    }
    decoder_norm_ = nn::LayerNorm(ps_, "dec_norm", w);
    head_ = nn::Linear(ps_, "head", w, 1, rng, sd);
    if (cfg_.zero_head) ps_[head_.w].value.setZero();
}

Var AttentionRegressor::forward(Tape& t, const QueryBatch& b) {
    b.validate(layout_);
    const int w = cfg_.model_width;
    const int g = b.groups;
    std::vector<Var> parts;
    parts.push_back(device_(t, ps_, b.device));
    if (layout_ == TokenLayout::Base) {
        parts.push_back(mode_in_(t, ps_, t.constant(b.modes)));
    } else {
        std::vector<int> ids;
        for (int n : b.index) ids.push_back(std::clamp(n, 1, cfg_.max_index) - 1);
        parts.push_back(index_(t, ps_, ids));
        parts.push_back(mode_in_(t, ps_, t.constant(b.modes.leftCols(2))));
        parts.push_back(mode_in_(t, ps_, t.constant(b.modes.rightCols(2))));
    }
    const int tokens = static_cast<int>(parts.size());
    Var x = ag::add(ag::interleave(parts), t.constant(nn::position_encoding(tokens, w).replicate(g, 1)));
    for (const auto& layer : encoder_) x = layer(t, ps_, x, g, tokens);
    const Var memory = encoder_norm_(t, ps_, x);

    const std::span<const double> tv(b.times.data(), static_cast<std::size_t>(b.times.size()));
    Var q = ag::add(time_in_(t, ps_, t.constant(b.times)),
                    t.constant(nn::scalar_encoding(tv, w, cfg_.time_f_lo, cfg_.time_f_hi)));
    for (const auto& layer : decoder_) q = layer(t, ps_, q, memory, g, b.tq, tokens);
    return head_(t, ps_, decoder_norm_(t, ps_, q));
}

Mat AttentionRegressor::predict(const QueryBatch& b) {
    Tape t(false);
    return forward(t, b).value();
}

namespace {

double batch_loss(AttentionRegressor& m, const QueryBatch& b, const Mat& target) {
    return (m.predict(b) - target).squaredNorm() / static_cast<double>(target.size());
}

}  // namespace

double grad_check(AttentionRegressor& model, const QueryBatch& batch, const Mat& target, double epsilon,
                  std::uint64_t seed, int sampled, double floor) {
    if (!(epsilon >= 1e-7 && epsilon <= 1e-3)) throw Error(ErrorKind::InvalidArgument, "epsilon outside [1e-7, 1e-3]");
    auto& ps = model.params();
    ps.zero_grad();
    {
        Tape t;
        const Var loss = ag::mse(model.forward(t, batch), target);
        t.backward(loss);
    }
    const std::size_t total = ps.scalar_count();
    Rng rng(mix_seed(seed, 0x9c));
    double worst = 0.0;
    for (int s = 0; s < sampled; ++s) {
        std::size_t flat = uniform_index(rng, total);
        std::size_t pi = 0;
        while (flat >= static_cast<std::size_t>(ps.all()[pi].value.size())) {
            flat -= static_cast<std::size_t>(ps.all()[pi].value.size());
            ++pi;
        }
        auto& p = ps.all()[pi];
        double& x = p.value.data()[flat];
        const double analytic = p.grad.data()[flat];
        const double orig = x;
        x = orig + epsilon;
        const double up = batch_loss(model, batch, target);
        x = orig - epsilon;
        const double down = batch_loss(model, batch, target);
        x = orig;
        const double numeric = (up - down) / (2.0 * epsilon);
        const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
        worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
    ps.zero_grad();
    return worst;
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct FitItem {
    int device = 0;
    int index = 1;
    std::array<double, 4> features{};
    double gate = 1.0;
    std::vector<double> times;
    std::vector<double> target;
};

QueryBatch make_batch(TokenLayout layout, std::span<const FitItem* const> items, int tq) {
    QueryBatch b;
    b.groups = static_cast<int>(items.size());
    b.tq = tq;
    const Eigen::Index nf = layout == TokenLayout::Base ? 2 : 4;
    b.modes.resize(b.groups, nf);
    b.times.resize(Eigen::Index{b.groups} * tq, 1);
    for (int g = 0; g < b.groups; ++g) {
        const FitItem& it = *items[static_cast<std::size_t>(g)];
        b.device.push_back(it.device);
        b.index.push_back(it.index);
        for (Eigen::Index f = 0; f < nf; ++f) b.modes(g, f) = it.features[static_cast<std::size_t>(f)];
    }
    return b;
}

double validation_loss(AttentionRegressor& model, std::span<const FitItem> items, int stride) {
    double se = 0.0;
    std::size_t count = 0;
    for (const FitItem& it : items) {
        std::vector<std::size_t> idx;
        for (std::size_t k = 0; k < it.times.size(); k += static_cast<std::size_t>(stride)) idx.push_back(k);
        const FitItem* ptr = &it;
        QueryBatch b = make_batch(model.layout(), std::span<const FitItem* const>(&ptr, 1), static_cast<int>(idx.size()));
        for (std::size_t r = 0; r < idx.size(); ++r) b.times(static_cast<Eigen::Index>(r), 0) = it.times[idx[r]];
        const Mat out = model.predict(b);
        for (std::size_t r = 0; r < idx.size(); ++r) {
            const double d = it.gate * out(static_cast<Eigen::Index>(r), 0) - it.target[idx[r]];
            se += d * d;
        }
        count += idx.size();
    }
    return count ? se / static_cast<double>(count) : 0.0;
}

ModuleLog fit(AttentionRegressor& model, const std::vector<FitItem>& train, const std::vector<FitItem>& val,
              const TrainOptions& opt, const std::string& name, std::uint64_t stream) {
    if (train.empty()) throw Error(ErrorKind::MissingOrderDataset, name + ": no training samples");
    const std::vector<FitItem>& select = val.empty() ? train : val;
    ModuleLog log;
    log.name = name;
    log.initial_val_loss = validation_loss(model, select, opt.val_stride);
    log.best_val_loss = log.initial_val_loss;
    auto best = model.params().all();
    nn::AdamW adam(opt.adam);
    Rng rng(mix_seed(opt.seed, stream));
    std::vector<std::size_t> order(train.size());
    const int tq = opt.points_per_sample;

    for (int epoch = 1; epoch <= opt.epochs; ++epoch) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
        double epoch_loss = 0.0;
        int steps = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(opt.batch_samples)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(opt.batch_samples));
            std::vector<const FitItem*> items;
            for (std::size_t i = start; i < stop; ++i) items.push_back(&train[order[i]]);
            QueryBatch b = make_batch(model.layout(), items, tq);
            Mat target(b.times.rows(), 1);
            Mat gate(b.times.rows(), 1);
            for (std::size_t g = 0; g < items.size(); ++g) {
                const FitItem& it = *items[g];
                for (int k = 0; k < tq; ++k) {
                    const std::size_t idx = uniform_index(rng, it.times.size());
                    const Eigen::Index r = static_cast<Eigen::Index>(g) * tq + k;
                    b.times(r, 0) = it.times[idx];
                    target(r, 0) = it.target[idx];
                    gate(r, 0) = it.gate;
                }
            }
            Tape t;
            const Var pred = ag::mul(model.forward(t, b), t.constant(gate));
            const Var loss = ag::mse(pred, target);
            const double lv = loss.value()(0, 0);
            if (!std::isfinite(lv)) {
                throw Error(ErrorKind::NonFiniteLoss,
                            name + ": loss is " + std::to_string(lv) + " at epoch " + std::to_string(epoch) +
                                " step " + std::to_string(steps) + " (try a lower learning rate)");
            }
            t.backward(loss);
            adam.step(model.params());
            epoch_loss += lv;
            ++steps;
        }
        log.train_loss.push_back(epoch_loss / steps);
        const double v = validation_loss(model, select, opt.val_stride);
        if (!std::isfinite(v)) throw Error(ErrorKind::NonFiniteLoss, name + ": validation loss is not finite");
        log.val_loss.push_back(v);
        if (opt.log) {
            std::ostringstream msg;
            msg << name << " epoch " << epoch << " train " << log.train_loss.back() << " val " << v;
            opt.log(msg.str());
        }
        if (v < log.best_val_loss) {
            log.best_val_loss = v;
            log.best_epoch = epoch;
            best = model.params().all();
        } else if (epoch - log.best_epoch >= opt.patience) {
            break;
        }
    }
    model.params().all() = std::move(best);
    model.params().zero_grad();
    return log;
}

std::array<double, 4> residual_features(std::span<const NormalizedMode> modes, int j) {
    const NormalizedMode cur = modes[static_cast<std::size_t>(j - 1)];
    const NormalizedMode prev = j >= 2 ? modes[static_cast<std::size_t>(j - 2)] : NormalizedMode{0.0, 0.0};
    return {cur.p, cur.a, prev.p, prev.a};
}

}  // namespace

std::vector<double> predict_base(AttentionRegressor& base, double p, double a, DriverKind device,
                                 std::span<const double> times, double gain) {
    if (base.layout() != TokenLayout::Base) throw Error(ErrorKind::ShapeMismatch, "not a base predictor");
    if (times.empty()) throw Error(ErrorKind::ShapeMismatch, "no query times");
    QueryBatch b;
    b.groups = 1;
    b.tq = static_cast<int>(times.size());
    b.device = {static_cast<int>(device)};
    b.modes.resize(1, 2);
    b.modes << p, a;
    b.times = Eigen::Map<const Mat>(times.data(), b.tq, 1);
    const Mat out = base.predict(b);
    std::vector<double> v(times.size());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = gain * out(static_cast<Eigen::Index>(k), 0);
    return v;
}

std::vector<double> surrogate_times(const SurrogateBundle& bundle, double p_max, std::span<const double> times) {
    std::vector<double> t(times.begin(), times.end());
    double first = 0.0;
    for (double x : t) {
        if (x > 0.0) {
            first = x;
            break;
        }
    }
    for (double& x : t) {
        if (x == 0.0) x = first / 2.0;
        x *= p_max;
    }
    return normalize_times(t, bundle.norm.mu_t, bundle.norm.sigma_t);
}

ModuleLog train_base(SurrogateBundle& bundle, const Dataset& data, const TrainOptions& opt) {
    if (!data.by_order.contains(1)) throw Error(ErrorKind::MissingOrderDataset, "base training needs the order-1 stratum");
    bundle.norm = {data.manifest.mu_t, data.manifest.sigma_t, data.manifest.config.vdd, data.manifest.config.dt};
    bundle.seed = opt.seed;
    bundle.base.emplace(bundle.config, TokenLayout::Base, mix_seed(opt.seed, 0));
    bundle.residuals.clear();
    bundle.logs.clear();
    const std::vector<double> grid = data.times();
    std::vector<FitItem> train, val;
    for (const Sample& s : data.by_order.at(1)) {
        if (s.split == Split::Test) continue;
        FitItem it;
        it.device = static_cast<int>(s.device);
        it.features = {1.0, 1.0, 0.0, 0.0};
        it.gate = s.modes[0].a * s.a_max;
        it.times = surrogate_times(bundle, s.p_max, grid);
        it.target = s.target;
        (s.split == Split::Train ? train : val).push_back(std::move(it));
    }
    ModuleLog log = fit(*bundle.base, train, val, opt, "base", 1);
    log.order = 1;
    bundle.logs.push_back(log);
    return log;
}

void train_residual_cascade(SurrogateBundle& bundle, const Dataset& data, int n_modules, const TrainOptions& opt) {
    if (!bundle.base) throw Error(ErrorKind::InvalidArgument, "train the base predictor first");
    for (int j = 1; j <= n_modules; ++j) {
        if (!data.by_order.contains(j)) {
            throw Error(ErrorKind::MissingOrderDataset, "residual module " + std::to_string(j) + " needs the order-" +
                                                            std::to_string(j) + " stratum");
        }
    }
    bundle.residuals.clear();
    std::erase_if(bundle.logs, [](const ModuleLog& l) { return l.name != "base"; });
    const std::vector<double> grid = data.times();
    for (int j = 1; j <= n_modules; ++j) {
        std::vector<FitItem> train, val;
        for (const Sample& s : data.by_order.at(j)) {
            if (s.split == Split::Test) continue;
            FitItem it;
            it.device = static_cast<int>(s.device);
            it.index = j;
            it.features = residual_features(s.modes, j);
            it.times = surrogate_times(bundle, s.p_max, grid);
            InferOptions prior;
            prior.max_modules = j - 1;
            const std::vector<double> before = predict_normalized(bundle, s.modes, s.a_max, s.device, it.times, prior);
            it.target.resize(before.size());
            for (std::size_t k = 0; k < before.size(); ++k) it.target[k] = s.target[k] - before[k];
            (s.split == Split::Train ? train : val).push_back(std::move(it));
        }
        AttentionRegressor module(bundle.config, TokenLayout::Residual, mix_seed(opt.seed, static_cast<std::uint64_t>(j)));
        ModuleLog log = fit(module, train, val, opt, "residual" + std::to_string(j), 100 + static_cast<std::uint64_t>(j));
        log.order = j;
        bundle.logs.push_back(log);
        bundle.residuals.push_back(std::move(module));
    }
}

// ---------------------------------------------------------------------------
// Inference

std::vector<double> predict_normalized(SurrogateBundle& bundle, std::span<const NormalizedMode> modes, double a_max,
                                       DriverKind device, std::span<const double> times, const InferOptions& opt,
                                       InferStats* stats) {
    if (!bundle.base) throw Error(ErrorKind::InvalidArgument, "bundle has no base predictor");
    if (modes.empty()) throw Error(ErrorKind::EmptyModes, "no modes to infer from");
    if (times.empty()) throw Error(ErrorKind::ShapeMismatch, "no query times");
    const int n = static_cast<int>(modes.size());
    const int trained = static_cast<int>(bundle.residuals.size());
    const int m = opt.max_modules < 0 ? n : std::min(opt.max_modules, n);
    if (m > trained && (!opt.allow_extrapolation || trained == 0)) {
        throw Error(ErrorKind::OrderExceedsCascade, "order " + std::to_string(m) + " exceeds the " +
                                                        std::to_string(trained) + "-module cascade");
    }
    const auto tq = static_cast<int>(times.size());

    // Each mode is evaluated as its own first-order system: self-normalized
    // features (1, 1), time measured in its own time constant, output scaled
    // by its physical gain.
    QueryBatch b;
    b.groups = n;
    b.tq = tq;
    b.modes = Mat::Ones(n, 2);
    b.times.resize(Eigen::Index{n} * tq, 1);
    for (int i = 0; i < n; ++i) {
        b.device.push_back(static_cast<int>(device));
        const double shift = std::log10(modes[static_cast<std::size_t>(i)].p) / bundle.norm.sigma_t;
        for (int k = 0; k < tq; ++k) b.times(Eigen::Index{i} * tq + k, 0) = times[static_cast<std::size_t>(k)] + shift;
    }
    const Mat base_out = bundle.base->predict(b);
    std::vector<double> out(times.size(), 0.0);
    for (int i = 0; i < n; ++i) {
        const double gain = modes[static_cast<std::size_t>(i)].a * a_max;
        for (int k = 0; k < tq; ++k) out[static_cast<std::size_t>(k)] += gain * base_out(Eigen::Index{i} * tq + k, 0);
    }

    auto residual = [&](int j) {
        const int used = std::min(j, trained);
        QueryBatch r;
        r.groups = 1;
        r.tq = tq;
        r.device = {static_cast<int>(device)};
        r.index = {used};
        const auto f = residual_features(modes, j);
        r.modes.resize(1, 4);
        r.modes << f[0], f[1], f[2], f[3];
        r.times = Eigen::Map<const Mat>(times.data(), tq, 1);
        return bundle.residuals[static_cast<std::size_t>(used - 1)].predict(r);
    };
    std::vector<Mat> corrections(static_cast<std::size_t>(m));
    if (opt.threads > 1 && m > 1) {
        std::vector<std::future<Mat>> jobs;
        for (int j = 1; j <= m; ++j) jobs.push_back(std::async(std::launch::async, residual, j));
        for (int j = 1; j <= m; ++j) corrections[static_cast<std::size_t>(j - 1)] = jobs[static_cast<std::size_t>(j - 1)].get();
    } else {
        for (int j = 1; j <= m; ++j) corrections[static_cast<std::size_t>(j - 1)] = residual(j);
    }
    for (const Mat& c : corrections) {
        for (int k = 0; k < tq; ++k) out[static_cast<std::size_t>(k)] += c(k, 0);
    }
    if (stats) {
        stats->base_evaluations += n;
        stats->residual_evaluations += m;
    }
    return out;
}

Waveform infer(SurrogateBundle& bundle, std::span<const GainMode> modes, DriverKind device,
               std::span<const double> times, const InferOptions& opt, InferStats* stats) {
    const NormalizedModes nm = normalize_modes(modes);
    Waveform w;
    w.times.assign(times.begin(), times.end());
    w.values.assign(times.size(), 0.0);
    w.validate();
    const std::vector<double> t = surrogate_times(bundle, nm.p_max, times);
    const std::vector<double> v = predict_normalized(bundle, nm.modes, nm.a_max, device, t, opt, stats);
    w.values = denormalize_waveform(v, 0.0, bundle.norm.vdd);
    return w;
}

std::vector<double> predict_sample(SurrogateBundle& bundle, const Dataset& data, const Sample& s,
                                   const InferOptions& opt) {
    const std::vector<double> t = surrogate_times(bundle, s.p_max, data.times());
    return predict_normalized(bundle, s.modes, s.a_max, s.device, t, opt);
}

// ---------------------------------------------------------------------------
// Bundle file: magic, u32 version, u64 header length, JSON header, u64 value
// count, float64 payload, u64 FNV-1a checksum of everything before it.

namespace {

constexpr char kMagic[8] = {'R', 'C', 'M', 'O', 'D', 'A', 'L', '\0'};

template <typename T>
void put(std::string& out, T v) {
    static_assert(std::endian::native == std::endian::little, "bundle IO assumes a little-endian host");
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

template <typename T>
T get(const std::string& in, std::size_t& pos) {
    if (pos + sizeof(T) > in.size()) throw Error(ErrorKind::CorruptFile, "bundle is truncated");
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

json config_json(const AttentionRegressorConfig& c) {
    return {{"encoder_layers", c.encoder_layers}, {"decoder_layers", c.decoder_layers}, {"model_width", c.model_width},
            {"heads", c.heads},                   {"ffn_width", c.ffn_width},           {"max_index", c.max_index},
            {"init_std", c.init_std},             {"zero_head", c.zero_head},           {"time_f_lo", c.time_f_lo},
            {"time_f_hi", c.time_f_hi}};
}

AttentionRegressorConfig config_from(const json& j) {
    AttentionRegressorConfig c;
    c.encoder_layers = j.at("encoder_layers");
    c.decoder_layers = j.at("decoder_layers");
    c.model_width = j.at("model_width");
    c.heads = j.at("heads");
    c.ffn_width = j.at("ffn_width");
    c.max_index = j.at("max_index");
    c.init_std = j.at("init_std");
    c.zero_head = j.at("zero_head");
    c.time_f_lo = j.at("time_f_lo");
    c.time_f_hi = j.at("time_f_hi");
    return c;
}

json module_json(const std::string& name, const AttentionRegressor& m) {
    json tensors = json::array();
    for (const auto& p : m.params().all()) tensors.push_back({{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}});
    return {{"name", name}, {"layout", static_cast<int>(m.layout())}, {"tensors", tensors}};
}

}  // namespace

void save_bundle(const SurrogateBundle& bundle, const std::filesystem::path& path) {
    if (!bundle.base) throw Error(ErrorKind::InvalidArgument, "bundle has no base predictor");
    json modules = json::array();
    modules.push_back(module_json("base", *bundle.base));
    for (std::size_t j = 0; j < bundle.residuals.size(); ++j) {
        modules.push_back(module_json("residual" + std::to_string(j + 1), bundle.residuals[j]));
    }
    json logs = json::array();
    for (const ModuleLog& l : bundle.logs) {
        logs.push_back({{"name", l.name},
                        {"order", l.order},
                        {"initial_val_loss", l.initial_val_loss},
                        {"train_loss", l.train_loss},
                        {"val_loss", l.val_loss},
                        {"best_epoch", l.best_epoch},
                        {"best_val_loss", l.best_val_loss}});
    }
    const json header{{"config", config_json(bundle.config)},
                      {"norm",
                       {{"mu_t", bundle.norm.mu_t},
                        {"sigma_t", bundle.norm.sigma_t},
                        {"vdd", bundle.norm.vdd},
                        {"dt", bundle.norm.dt}}},
                      {"seed", bundle.seed},
                      {"modules", modules},
                      {"logs", logs}};
    const std::string text = header.dump();

    std::string out(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, SurrogateBundle::kVersion);
    put<std::uint64_t>(out, text.size());
    out += text;
    std::uint64_t count = bundle.base->parameter_count();
    for (const auto& r : bundle.residuals) count += r.parameter_count();
    put<std::uint64_t>(out, count);
    auto dump = [&](const AttentionRegressor& m) {
        for (const auto& p : m.params().all()) {
            for (Eigen::Index i = 0; i < p.value.size(); ++i) put<double>(out, p.value.data()[i]);
        }
    };
    dump(*bundle.base);
    for (const auto& r : bundle.residuals) dump(r);
    put<std::uint64_t>(out, fnv1a64(out));

    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorKind::Io, "cannot write " + path.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

SurrogateBundle load_bundle(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorKind::Io, "cannot read " + path.string());
    const std::string in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (in.size() < sizeof(kMagic) || std::memcmp(in.data(), kMagic, sizeof(kMagic)) != 0) {
        throw Error(ErrorKind::CorruptFile, path.string() + " is not a surrogate bundle");
    }
    std::size_t pos = sizeof(kMagic);
    const auto version = get<std::uint32_t>(in, pos);
    if (version != SurrogateBundle::kVersion) {
        throw Error(ErrorKind::VersionMismatch, "bundle version " + std::to_string(version) + ", expected " +
                                                    std::to_string(SurrogateBundle::kVersion));
    }
    const auto header_len = get<std::uint64_t>(in, pos);
    if (header_len > in.size() - pos) throw Error(ErrorKind::CorruptFile, "bundle is truncated");
    const std::string text = in.substr(pos, header_len);
    pos += header_len;
    const auto count = get<std::uint64_t>(in, pos);
    if (count > (in.size() - pos) / sizeof(double)) throw Error(ErrorKind::CorruptFile, "bundle is truncated");
    const std::size_t payload = pos;
    pos += count * sizeof(double);
    const std::size_t checked = pos;
    const auto checksum = get<std::uint64_t>(in, pos);
    if (pos != in.size() || checksum != fnv1a64(std::string_view(in).substr(0, checked))) {
        throw Error(ErrorKind::CorruptFile, "bundle checksum mismatch");
    }

    SurrogateBundle b;
    try {
        const json h = json::parse(text);
        b.config = config_from(h.at("config"));
        const json& n = h.at("norm");
        b.norm = {n.at("mu_t"), n.at("sigma_t"), n.at("vdd"), n.at("dt")};
        b.seed = h.at("seed");
        std::size_t at = payload;
        std::uint64_t used = 0;
        for (const json& mj : h.at("modules")) {
            AttentionRegressor m(b.config, static_cast<TokenLayout>(mj.at("layout").get<int>()), 0);
            const json& tensors = mj.at("tensors");
            if (tensors.size() != m.params().all().size()) throw Error(ErrorKind::CorruptFile, "tensor table mismatch");
            for (std::size_t i = 0; i < tensors.size(); ++i) {
                auto& p = m.params().all()[i];
                if (tensors[i].at("name") != p.name || tensors[i].at("rows") != p.value.rows() ||
                    tensors[i].at("cols") != p.value.cols()) {
                    throw Error(ErrorKind::CorruptFile, "tensor " + p.name + " does not match the configuration");
                }
                used += static_cast<std::uint64_t>(p.value.size());
                if (used > count) throw Error(ErrorKind::CorruptFile, "payload shorter than the tensor table");
                std::memcpy(p.value.data(), in.data() + at, static_cast<std::size_t>(p.value.size()) * sizeof(double));
                at += static_cast<std::size_t>(p.value.size()) * sizeof(double);
            }
            if (mj.at("name") == "base") {
                b.base.emplace(std::move(m));
            } else {
                b.residuals.push_back(std::move(m));
            }
        }
        if (used != count || !b.base) throw Error(ErrorKind::CorruptFile, "payload size does not match the tensor table");
        for (const json& lj : h.at("logs")) {
            ModuleLog l;
            l.name = lj.at("name");
            l.order = lj.at("order");
            l.initial_val_loss = lj.at("initial_val_loss");
            l.train_loss = lj.at("train_loss").get<std::vector<double>>();
            l.val_loss = lj.at("val_loss").get<std::vector<double>>();
            l.best_epoch = lj.at("best_epoch");
            l.best_val_loss = lj.at("best_val_loss");
            b.logs.push_back(std::move(l));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::CorruptFile, e.what());
    }
    return b;
}

}  // namespace rcmodal
