#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rcmodal/autograd.hpp"
#include "rcmodal/rng.hpp"

namespace rcmodal::nn {

using ag::Mat;
using ag::Parameter;
using ag::Tape;
using ag::Var;

/// Owns the parameters of one model. Layers refer to them by index, so the
/// store may be copied together with the layers.
class ParamStore {
public:
    int add(std::string name, Mat init, bool decay);
    [[nodiscard]] Parameter& operator[](int i) { return params_[static_cast<std::size_t>(i)]; }
    [[nodiscard]] const Parameter& operator[](int i) const { return params_[static_cast<std::size_t>(i)]; }
    [[nodiscard]] std::vector<Parameter>& all() noexcept { return params_; }
    [[nodiscard]] const std::vector<Parameter>& all() const noexcept { return params_; }
    [[nodiscard]] std::size_t scalar_count() const noexcept;
    void zero_grad();

private:
    std::vector<Parameter> params_;
};

/// Normal(0, std) truncated at two standard deviations.
[[nodiscard]] Mat truncated_normal_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double std);

struct Linear {
    int w = -1;
    int b = -1;

    Linear() = default;
    Linear(ParamStore& ps, const std::string& name, int in, int out, Rng& rng, double std);
    Var operator()(Tape& t, ParamStore& ps, const Var& x) const;
};

struct LayerNorm {
    int gamma = -1;
    int beta = -1;

    LayerNorm() = default;
    LayerNorm(ParamStore& ps, const std::string& name, int width);
    Var operator()(Tape& t, ParamStore& ps, const Var& x) const;
};

struct Embedding {
    int table = -1;

    Embedding() = default;
    Embedding(ParamStore& ps, const std::string& name, int count, int width, Rng& rng, double std);
    Var operator()(Tape& t, ParamStore& ps, std::span<const int> ids) const;
};

struct MultiHeadAttention {
    Linear q, k, v, o;
    int heads = 1;

    MultiHeadAttention() = default;
    MultiHeadAttention(ParamStore& ps, const std::string& name, int width, int heads, Rng& rng, double std);
    /// x holds `groups` sequences of length tq; memory holds sequences of length tk.
    Var operator()(Tape& t, ParamStore& ps, const Var& x, const Var& memory, int groups, int tq, int tk) const;
};

/// Self-attention over a single token: the softmax weight is identically 1,
/// so the output is o(v(x)) and the query/key projections would receive no
/// gradient. Only v and o are kept.
struct SingleTokenSelfAttention {
    Linear v, o;

    SingleTokenSelfAttention() = default;
    SingleTokenSelfAttention(ParamStore& ps, const std::string& name, int width, Rng& rng, double std);
    Var operator()(Tape& t, ParamStore& ps, const Var& x) const;
};

struct FeedForward {
    Linear up, down;

    FeedForward() = default;
    FeedForward(ParamStore& ps, const std::string& name, int width, int hidden, Rng& rng, double std);
    Var operator()(Tape& t, ParamStore& ps, const Var& x) const;
};

/// Pre-LN encoder block: x + SA(LN x), then x + FFN(LN x).
struct EncoderLayer {
    LayerNorm ln1, ln2;
    MultiHeadAttention attn;
    FeedForward ffn;

    EncoderLayer() = default;
    EncoderLayer(ParamStore& ps, const std::string& name, int width, int heads, int hidden, Rng& rng, double std);
    Var operator()(Tape& t, ParamStore& ps, const Var& x, int groups, int tokens) const;
};

/// Pre-LN decoder block over independent single-token queries:
/// self-attention, cross-attention to the encoder memory, feed-forward.
struct DecoderLayer {
    LayerNorm ln1, ln2, ln3;
    SingleTokenSelfAttention self;
    MultiHeadAttention cross;
    FeedForward ffn;

    DecoderLayer() = default;
    DecoderLayer(ParamStore& ps, const std::string& name, int width, int heads, int hidden, Rng& rng, double std);
    Var operator()(Tape& t, ParamStore& ps, const Var& x, const Var& memory, int groups, int tq, int tk) const;
};

struct AdamWOptions {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-2;
    double clip_norm = 1.0;  // global gradient norm; <= 0 disables
};

/// Adam with decoupled weight decay, applied to parameters flagged `decay`.
class AdamW {
public:
    explicit AdamW(AdamWOptions o = {}) : opt_(o) {}
    /// Consumes and zeroes the accumulated gradients. Returns the gradient
    /// norm before clipping.
    double step(ParamStore& ps);
    [[nodiscard]] long steps() const noexcept { return t_; }

private:
    AdamWOptions opt_;
    std::vector<Mat> m_, v_;
    long t_ = 0;
};

/// Standard sinusoidal encoding of integer positions 0..count-1 (count x width).
[[nodiscard]] Mat position_encoding(int count, int width);
/// Sinusoids of a continuous scalar at geometrically spaced frequencies in
/// [f_lo, f_hi]; one row per value.
[[nodiscard]] Mat scalar_encoding(std::span<const double> values, int width, double f_lo, double f_hi);

}  // namespace rcmodal::nn
