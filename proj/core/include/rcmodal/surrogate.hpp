#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rcmodal/dataset.hpp"
#include "rcmodal/nn.hpp"

namespace rcmodal {

using ag::Mat;

struct AttentionRegressorConfig {
    int encoder_layers = 3;
    int decoder_layers = 3;
    int model_width = 64;
    int heads = 4;
    int ffn_width = 128;
    int max_index = 10;     // rows of the order-index embedding
    double init_std = 0.02;
    bool zero_head = true;  // zero output head: untrained predictions are 0
    double time_f_lo = 0.1;  // frequency band of the time encoding
    double time_f_hi = 16.0;

    void validate() const;
};

/// Encoder token layout. Base: [device, mode]. Residual: [device, order
/// index, mode n, mode n-1].
enum class TokenLayout { Base = 0, Residual = 1 };

/// One forward batch: `groups` conditioning sets, each queried at `tq` times.
struct QueryBatch {
    int groups = 0;
    int tq = 0;
    std::vector<int> device;  // per group
    std::vector<int> index;   // per group, 1-based order index (residual layout)
    Mat modes;                // groups x 2 (base) or groups x 4 (residual)
    Mat times;                // groups*tq x 1, normalized log-time queries

    void validate(TokenLayout layout) const;
};

/// Encoder-decoder attention regressor mapping (conditioning, time) to a scalar.
class AttentionRegressor {
public:
    AttentionRegressor(const AttentionRegressorConfig& cfg, TokenLayout layout, std::uint64_t seed);

    /// groups*tq x 1. Throws ShapeMismatch on inconsistent batches.
    ag::Var forward(ag::Tape& tape, const QueryBatch& batch);
    /// Forward pass without gradient bookkeeping.
    [[nodiscard]] Mat predict(const QueryBatch& batch);

    [[nodiscard]] nn::ParamStore& params() noexcept { return ps_; }
    [[nodiscard]] const nn::ParamStore& params() const noexcept { return ps_; }
    [[nodiscard]] std::size_t parameter_count() const noexcept { return ps_.scalar_count(); }
    [[nodiscard]] TokenLayout layout() const noexcept { return layout_; }
    [[nodiscard]] const AttentionRegressorConfig& config() const noexcept { return cfg_; }

private:
    AttentionRegressorConfig cfg_;
    TokenLayout layout_;
    nn::ParamStore ps_;
    nn::Embedding device_, index_;
    nn::Linear mode_in_, time_in_;
    std::vector<nn::EncoderLayer> encoder_;
    nn::LayerNorm encoder_norm_;
    std::vector<nn::DecoderLayer> decoder_;
    nn::LayerNorm decoder_norm_;
    nn::Linear head_;
};

/// Max relative error between reverse-mode gradients of the MSE loss and
/// central differences, over `sampled` randomly chosen scalar parameters.
/// The relative error of one entry is |a - n| / max(|a|, |n|, floor).
[[nodiscard]] double grad_check(AttentionRegressor& model, const QueryBatch& batch, const Mat& target, double epsilon,
                                std::uint64_t seed = 0, int sampled = 64, double floor = 1e-6);

struct TrainOptions {
    int epochs = 200;
    int patience = 20;
    int batch_samples = 32;
    int points_per_sample = 128;
    int val_stride = 4;  // validation uses every val_stride-th grid point
    nn::AdamWOptions adam{};
    std::uint64_t seed = 0;
    std::function<void(const std::string&)> log;  // optional progress sink
};

struct ModuleLog {
    std::string name;
    int order = 0;  // dataset stratum the module was fitted on
    double initial_val_loss = 0.0;
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    int best_epoch = 0;  // 0 means the initial parameters were kept
    double best_val_loss = 0.0;
};

struct SurrogateNorm {
    double mu_t = 0.0;
    double sigma_t = 1.0;
    double vdd = 1.1;
    double dt = 10e-12;
};

/// Base predictor, residual cascade and the statistics needed to normalize
/// inputs and de-normalize outputs.
struct SurrogateBundle {
    static constexpr int kVersion = 1;

    AttentionRegressorConfig config;
    std::optional<AttentionRegressor> base;
    std::vector<AttentionRegressor> residuals;  // module j at position j-1
    SurrogateNorm norm;
    std::uint64_t seed = 0;
    std::vector<ModuleLog> logs;
};

/// Normalized base prediction for one mode described by (p~, A~), queried at
/// normalized times, scaled by `gain`.
[[nodiscard]] std::vector<double> predict_base(AttentionRegressor& base, double p, double a, DriverKind device,
                                               std::span<const double> times, double gain = 1.0);

/// Trains the base predictor on the order-1 stratum (train split, validation
/// on the val split). Throws MissingOrderDataset or NonFiniteLoss.
ModuleLog train_base(SurrogateBundle& bundle, const Dataset& data, const TrainOptions& opt);

/// Trains residual modules j = 1..n_modules, module j on the order-j stratum
/// against the residual left by the base sum and modules 1..j-1 (frozen).
void train_residual_cascade(SurrogateBundle& bundle, const Dataset& data, int n_modules, const TrainOptions& opt);

struct InferOptions {
    bool allow_extrapolation = false;  // reuse the last module for orders beyond the cascade
    int threads = 1;                   // residual modules evaluated concurrently when > 1
    /// Number of residual modules to apply; -1 applies one per mode.
    int max_modules = -1;
};

struct InferStats {
    int base_evaluations = 0;
    int residual_evaluations = 0;
};

/// Normalized cascade prediction: sum over modes of the gain-scaled base
/// response at mode-local time, plus residual modules 1..N. `times` are the
/// sample's normalized log-times.
[[nodiscard]] std::vector<double> predict_normalized(SurrogateBundle& bundle, std::span<const NormalizedMode> modes,
                                                     double a_max, DriverKind device, std::span<const double> times,
                                                     const InferOptions& opt = {}, InferStats* stats = nullptr);

/// Normalized log-times for physical `times` of a system with fastest rate
/// p_max; t = 0 is replaced by half the first nonzero time.
[[nodiscard]] std::vector<double> surrogate_times(const SurrogateBundle& bundle, double p_max,
                                                  std::span<const double> times);

/// Predicted output waveform in volts for a system given in gain form.
/// Throws OrderExceedsCascade when the order exceeds the trained cascade and
/// extrapolation is off.
[[nodiscard]] Waveform infer(SurrogateBundle& bundle, std::span<const GainMode> modes, DriverKind device,
                             std::span<const double> times, const InferOptions& opt = {}, InferStats* stats = nullptr);

/// Normalized prediction for a stored dataset sample.
[[nodiscard]] std::vector<double> predict_sample(SurrogateBundle& bundle, const Dataset& data, const Sample& s,
                                                 const InferOptions& opt = {});

void save_bundle(const SurrogateBundle& bundle, const std::filesystem::path& path);
/// Throws VersionMismatch for another format version, CorruptFile for a bad
/// magic, truncated payload or checksum failure.
[[nodiscard]] SurrogateBundle load_bundle(const std::filesystem::path& path);

}  // namespace rcmodal
