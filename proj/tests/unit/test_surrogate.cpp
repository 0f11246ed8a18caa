#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "rcmodal/dataset.hpp"
#include "rcmodal/error.hpp"
#include "rcmodal/surrogate.hpp"

using namespace rcmodal;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

AttentionRegressorConfig tiny(bool zero_head = true) {
    AttentionRegressorConfig c;
    c.encoder_layers = 1;
    c.decoder_layers = 1;
    c.model_width = 16;
    c.heads = 2;
    c.ffn_width = 32;
    c.zero_head = zero_head;
    return c;
}

QueryBatch random_batch(TokenLayout layout, int groups, int tq, std::uint64_t seed) {
    Rng rng(seed);
    QueryBatch b;
    b.groups = groups;
    b.tq = tq;
    const int nf = layout == TokenLayout::Base ? 2 : 4;
    b.modes.resize(groups, nf);
    for (int g = 0; g < groups; ++g) {
        b.device.push_back(static_cast<int>(uniform_index(rng, 2)));
        b.index.push_back(1 + static_cast<int>(uniform_index(rng, 4)));
        for (int f = 0; f < nf; ++f) b.modes(g, f) = uniform(rng, -1.0, 1.0);
    }
    b.times.resize(groups * tq, 1);
    for (int k = 0; k < groups * tq; ++k) b.times(k, 0) = uniform(rng, -2.0, 2.0);
    return b;
}

Mat random_target(Eigen::Index rows, std::uint64_t seed) {
    Rng rng(seed);
    Mat t(rows, 1);
    for (Eigen::Index i = 0; i < rows; ++i) t(i, 0) = uniform(rng, 0.0, 1.0);
    return t;
}

const Dataset& shared_data() {
    static const Dataset d = [] {
        DatasetConfig cfg;
        cfg.orders = {1, 2, 3};
        cfg.per_order = 10;
        cfg.seed = 3;
        return generate_dataset(cfg);
    }();
    return d;
}

TrainOptions quick(int epochs) {
    TrainOptions o;
    o.epochs = epochs;
    o.patience = epochs;
    o.batch_samples = 4;
    o.points_per_sample = 32;
    o.val_stride = 20;
    o.seed = 5;
    return o;
}

// Base plus a cascade, trained just enough to exercise the plumbing.
SurrogateBundle& shared_bundle() {
    static SurrogateBundle b = [] {
        SurrogateBundle s;
        s.config = tiny(false);
        (void)train_base(s, shared_data(), quick(2));
        train_residual_cascade(s, shared_data(), 2, quick(2));
        return s;
    }();
    return b;
}

std::vector<GainMode> modes_of_order(int order) {
    return shared_data().by_order.at(order).front().gains;
}

}  // namespace

TEST_CASE("configuration validation", "[surrogate]") {
    AttentionRegressorConfig c;
    c.model_width = 66;
    CHECK_THROWS_AS(c.validate(), Error);
    CHECK_NOTHROW(AttentionRegressorConfig{}.validate());
    const AttentionRegressor m(AttentionRegressorConfig{}, TokenLayout::Base, 1);
    CHECK(m.parameter_count() > 0);
}

TEST_CASE("reverse-mode gradients match finite differences", "[surrogate]") {
    for (auto layout : {TokenLayout::Base, TokenLayout::Residual}) {
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            AttentionRegressor m(tiny(false), layout, seed);
            const QueryBatch b = random_batch(layout, 3, 4, seed + 10);
            CHECK(grad_check(m, b, random_target(12, seed), 1e-5, seed, 64) < 1e-4);
        }
    }
}

TEST_CASE("zero head: bias gradient is -2 mean(target)", "[surrogate]") {
    AttentionRegressor m(tiny(true), TokenLayout::Base, 4);
    const QueryBatch b = random_batch(TokenLayout::Base, 2, 5, 1);
    const Mat target = random_target(10, 2);
    auto& ps = m.params();
    ps.zero_grad();
    {
        ag::Tape t;
        const auto loss = ag::mse(m.forward(t, b), target);
        t.backward(loss);
    }
    const nn::Parameter* bias = nullptr;
    for (const auto& p : ps.all()) {
        if (p.name == "head.b") bias = &p;
    }
    REQUIRE(bias != nullptr);
    CHECK(bias->grad(0, 0) == Approx(-2.0 * target.mean()).epsilon(1e-12));
    ps.zero_grad();
    CHECK(grad_check(m, b, target, 1e-6, 0, 64) < 1e-5);
}

TEST_CASE("duplicated inputs give the same gradients as one copy", "[surrogate]") {
    AttentionRegressor m(tiny(false), TokenLayout::Base, 6);
    const QueryBatch one = random_batch(TokenLayout::Base, 1, 4, 3);
    QueryBatch two = one;
    two.groups = 2;
    two.device = {one.device[0], one.device[0]};
    two.index = {one.index[0], one.index[0]};
    two.modes = one.modes.replicate(2, 1);
    two.times = one.times.replicate(2, 1);
    const Mat target = random_target(4, 1);
    auto grads = [&](const QueryBatch& b, const Mat& y) {
        m.params().zero_grad();
        ag::Tape t;
        const auto loss = ag::mse(m.forward(t, b), y);
        t.backward(loss);
        std::vector<Mat> g;
        for (const auto& p : m.params().all()) g.push_back(p.grad);
        m.params().zero_grad();
        return g;
    };
    const auto a = grads(one, target);
    const auto b = grads(two, target.replicate(2, 1));
    for (std::size_t i = 0; i < a.size(); ++i) CHECK((a[i] - b[i]).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + a[i].cwiseAbs().maxCoeff()));
}

TEST_CASE("predict_base contracts", "[surrogate]") {
    AttentionRegressor zero(AttentionRegressorConfig{}, TokenLayout::Base, 1);
    const std::vector<double> t{-1.0, 0.0, 0.5, 2.0};
    for (double v : predict_base(zero, 1.0, 1.0, DriverKind::Saturating, t)) CHECK(v == 0.0);

    AttentionRegressor m(tiny(false), TokenLayout::Base, 2);
    const auto a = predict_base(m, 0.7, -0.3, DriverKind::IdealStep, t);
    const std::vector<double> rev(t.rbegin(), t.rend());
    const auto b = predict_base(m, 0.7, -0.3, DriverKind::IdealStep, rev);
    for (std::size_t k = 0; k < t.size(); ++k) CHECK(a[k] == b[t.size() - 1 - k]);
    // A one-row product takes a different GEMM kernel, so only rounding may differ.
    const std::vector<double> single{t[2]};
    CHECK(predict_base(m, 0.7, -0.3, DriverKind::IdealStep, single)[0] == Approx(a[2]).epsilon(1e-12));
    CHECK_THROWS_AS(predict_base(m, 0.7, -0.3, DriverKind::IdealStep, std::vector<double>{}), Error);
}

TEST_CASE("query batches are shape-checked", "[surrogate]") {
    AttentionRegressor m(tiny(), TokenLayout::Residual, 1);
    QueryBatch b = random_batch(TokenLayout::Base, 2, 3, 1);
    CHECK_THROWS_MATCHES(m.predict(b), Error, Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.kind() == ErrorKind::ShapeMismatch;
                         }));
}

TEST_CASE("training descends on a single sample", "[surrogate]") {
    Dataset d = shared_data();
    auto& order1 = d.by_order.at(1);
    order1.erase(order1.begin() + 1, order1.end());
    REQUIRE(order1.front().split == Split::Train);
    SurrogateBundle s;
    s.config = tiny(false);
    TrainOptions o = quick(50);
    o.batch_samples = 1;
    const ModuleLog log = train_base(s, d, o);
    REQUIRE(log.train_loss.size() == 50);
    bool decreased = false;
    for (std::size_t k = 1; k < log.train_loss.size(); ++k) decreased = decreased || log.train_loss[k] < log.train_loss[0];
    CHECK(decreased);
    CHECK(log.best_val_loss <= log.initial_val_loss);
}

TEST_CASE("training is deterministic", "[surrogate]") {
    auto run = [] {
        SurrogateBundle s;
        s.config = tiny(false);
        (void)train_base(s, shared_data(), quick(2));
        train_residual_cascade(s, shared_data(), 1, quick(2));
        return s;
    };
    SurrogateBundle a = run();
    SurrogateBundle b = run();
    for (std::size_t i = 0; i < a.base->params().all().size(); ++i) {
        CHECK(a.base->params().all()[i].value == b.base->params().all()[i].value);
    }
    CHECK(a.residuals[0].params().all().back().value == b.residuals[0].params().all().back().value);
    CHECK(a.logs.back().val_loss == b.logs.back().val_loss);
}

TEST_CASE("every module keeps its best epoch", "[surrogate]") {
    for (const ModuleLog& log : shared_bundle().logs) {
        CHECK(log.best_val_loss <= log.initial_val_loss);
        if (log.best_epoch > 0) CHECK(log.val_loss[static_cast<std::size_t>(log.best_epoch - 1)] == log.best_val_loss);
    }
}

TEST_CASE("zero residual targets train to a near-zero module", "[surrogate]") {
    SurrogateBundle s;
    s.config = tiny(true);
    Dataset d = shared_data();
    (void)train_base(s, d, quick(1));
    InferOptions none;
    none.max_modules = 0;
    for (Sample& x : d.by_order.at(1)) x.target = predict_sample(s, d, x, none);
    train_residual_cascade(s, d, 1, quick(3));
    QueryBatch b = random_batch(TokenLayout::Residual, 4, 16, 9);
    b.index = {1, 1, 1, 1};
    CHECK(s.residuals[0].predict(b).cwiseAbs().maxCoeff() < 0.01);
}

TEST_CASE("residual training needs every lower stratum", "[surrogate]") {
    SurrogateBundle s;
    s.config = tiny();
    CHECK_THROWS_AS(train_residual_cascade(s, shared_data(), 1, quick(1)), Error);  // no base yet
    (void)train_base(s, shared_data(), quick(1));
    CHECK_THROWS_MATCHES(train_residual_cascade(s, shared_data(), 4, quick(1)), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.kind() == ErrorKind::MissingOrderDataset; }));
    Dataset empty = shared_data();
    empty.by_order.erase(1);
    CHECK_THROWS_MATCHES(train_base(s, empty, quick(1)), Error, Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.kind() == ErrorKind::MissingOrderDataset;
                         }));
}

TEST_CASE("order-1 inference is base plus the first correction", "[surrogate]") {
    SurrogateBundle& s = shared_bundle();
    const std::vector<NormalizedMode> modes{{1.0, 1.0}};
    const std::vector<double> t{-1.5, -0.2, 0.4, 1.3};
    const auto full = predict_normalized(s, modes, 1.0, DriverKind::Saturating, t, {});
    const auto base = predict_base(*s.base, 1.0, 1.0, DriverKind::Saturating, t);
    QueryBatch b;
    b.groups = 1;
    b.tq = 4;
    b.device = {1};
    b.index = {1};
    b.modes.resize(1, 4);
    b.modes << 1.0, 1.0, 0.0, 0.0;
    b.times = Eigen::Map<const Mat>(t.data(), 4, 1);
    const Mat e1 = s.residuals[0].predict(b);
    for (std::size_t k = 0; k < t.size(); ++k) CHECK(full[k] == Approx(base[k] + e1(static_cast<Eigen::Index>(k), 0)).epsilon(1e-14));
}

TEST_CASE("inference makes N base and N residual evaluations", "[surrogate]") {
    SurrogateBundle& s = shared_bundle();
    const std::vector<double> times{0.0, 1e-9, 2e-9};
    for (int order = 1; order <= 2; ++order) {
        InferStats stats;
        (void)infer(s, modes_of_order(order), DriverKind::Saturating, times, {}, &stats);
        CHECK(stats.base_evaluations == static_cast<std::size_t>(order));
        CHECK(stats.residual_evaluations == static_cast<std::size_t>(order));
    }
}

TEST_CASE("orders past the cascade need the extrapolation flag", "[surrogate]") {
    SurrogateBundle& s = shared_bundle();
    const std::vector<double> times{0.0, 1e-9};
    CHECK_THROWS_MATCHES(infer(s, modes_of_order(3), DriverKind::Saturating, times, {}), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.kind() == ErrorKind::OrderExceedsCascade; }));
    InferOptions ext;
    ext.allow_extrapolation = true;
    InferStats stats;
    const Waveform w = infer(s, modes_of_order(3), DriverKind::Saturating, times, ext, &stats);
    CHECK(w.size() == 2);
    CHECK(stats.residual_evaluations == 3);
}

TEST_CASE("concurrent residual evaluation is bitwise identical", "[surrogate]") {
    SurrogateBundle& s = shared_bundle();
    const auto times = shared_data().times();
    InferOptions one;
    one.allow_extrapolation = true;
    InferOptions many = one;
    many.threads = 4;
    const Waveform a = infer(s, modes_of_order(3), DriverKind::IdealStep, times, one);
    const Waveform b = infer(s, modes_of_order(3), DriverKind::IdealStep, times, many);
    CHECK(a.values == b.values);
}

TEST_CASE("outputs are independent of the other query points", "[surrogate]") {
    SurrogateBundle& s = shared_bundle();
    const std::vector<double> all{0.0, 1e-10, 1e-9, 5e-9, 1e-8};
    const std::vector<double> some{1e-9, 1e-8};
    const Waveform a = infer(s, modes_of_order(2), DriverKind::Saturating, all, {});
    const Waveform b = infer(s, modes_of_order(2), DriverKind::Saturating, some, {});
    CHECK(b.values[0] == Approx(a.values[2]).epsilon(1e-12));
    CHECK(b.values[1] == Approx(a.values[4]).epsilon(1e-12));
}

TEST_CASE("bundle save and load", "[surrogate]") {
    SurrogateBundle& s = shared_bundle();
    const fs::path p = fs::temp_directory_path() / "rcmodal_unit_bundle.rcm";
    save_bundle(s, p);
    SurrogateBundle back = load_bundle(p);
    REQUIRE(back.residuals.size() == s.residuals.size());
    for (std::size_t i = 0; i < s.base->params().all().size(); ++i) {
        CHECK(back.base->params().all()[i].value == s.base->params().all()[i].value);
    }
    CHECK(back.norm.mu_t == s.norm.mu_t);
    CHECK(back.logs.size() == s.logs.size());
    CHECK(back.logs.back().val_loss == s.logs.back().val_loss);
    const auto times = shared_data().times();
    CHECK(infer(back, modes_of_order(2), DriverKind::Saturating, times, {}).values ==
          infer(s, modes_of_order(2), DriverKind::Saturating, times, {}).values);

    std::string bytes;
    {
        std::ifstream in(p, std::ios::binary);
        bytes.assign(std::istreambuf_iterator<char>(in), {});
    }
    auto write = [&](const std::string& b) {
        std::ofstream out(p, std::ios::binary);
        out << b;
    };
    auto kind_of = [&]() {
        try {
            (void)load_bundle(p);
        } catch (const Error& e) {
            return e.kind();
        }
        return ErrorKind::Io;
    };
    write(bytes.substr(0, bytes.size() / 2));
    CHECK(kind_of() == ErrorKind::CorruptFile);
    std::string flipped = bytes;
    flipped[flipped.size() - 100] ^= 0x10;
    write(flipped);
    CHECK(kind_of() == ErrorKind::CorruptFile);
    std::string future = bytes;
    future[8] = 2;  // version field follows the 8-byte magic
    write(future);
    CHECK(kind_of() == ErrorKind::VersionMismatch);
    write("not a bundle");
    CHECK(kind_of() == ErrorKind::CorruptFile);
    fs::remove(p);
}
