#include "rcmodal/nn.hpp"

#include <cmath>

#include "rcmodal/error.hpp"

namespace rcmodal::nn {

int ParamStore::add(std::string name, Mat init, bool decay) {
    Parameter p{std::move(name), std::move(init), Mat(), decay};
    p.grad = Mat::Zero(p.value.rows(), p.value.cols());
    params_.push_back(std::move(p));
    return static_cast<int>(params_.size()) - 1;
}

std::size_t ParamStore::scalar_count() const noexcept {
    std::size_t n = 0;
    for (const Parameter& p : params_) n += static_cast<std::size_t>(p.value.size());
    return n;
}

void ParamStore::zero_grad() {
    for (Parameter& p : params_) p.grad.setZero(p.value.rows(), p.value.cols());
}

Mat truncated_normal_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double std) {
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = truncated_normal(rng, std);
    }
    return m;
}

Linear::Linear(ParamStore& ps, const std::string& name, int in, int out, Rng& rng, double std)
    : w(ps.add(name + ".w", truncated_normal_matrix(rng, in, out, std), true)),
      b(ps.add(name + ".b", Mat::Zero(1, out), false)) {}

Var Linear::operator()(Tape& t, ParamStore& ps, const Var& x) const {
    return ag::linear(x, t.param(ps[w]), t.param(ps[b]));
}

LayerNorm::LayerNorm(ParamStore& ps, const std::string& name, int width)
    : gamma(ps.add(name + ".gamma", Mat::Ones(1, width), false)),
      beta(ps.add(name + ".beta", Mat::Zero(1, width), false)) {}

Var LayerNorm::operator()(Tape& t, ParamStore& ps, const Var& x) const {
    return ag::layer_norm(x, t.param(ps[gamma]), t.param(ps[beta]));
}

Embedding::Embedding(ParamStore& ps, const std::string& name, int count, int width, Rng& rng, double std)
    : table(ps.add(name, truncated_normal_matrix(rng, count, width, std), false)) {}

Var Embedding::operator()(Tape& t, ParamStore& ps, std::span<const int> ids) const {
    return ag::gather_rows(t.param(ps[table]), ids);
}

MultiHeadAttention::MultiHeadAttention(ParamStore& ps, const std::string& name, int width, int h, Rng& rng,
                                       double std)
    : q(ps, name + ".q", width, width, rng, std),
      k(ps, name + ".k", width, width, rng, std),
      v(ps, name + ".v", width, width, rng, std),
      o(ps, name + ".o", width, width, rng, std),
      heads(h) {}

Var MultiHeadAttention::operator()(Tape& t, ParamStore& ps, const Var& x, const Var& memory, int groups, int tq,
                                   int tk) const {
    const Var a = ag::attention(q(t, ps, x), k(t, ps, memory), v(t, ps, memory), heads, groups, tq, tk);
    return o(t, ps, a);
}

SingleTokenSelfAttention::SingleTokenSelfAttention(ParamStore& ps, const std::string& name, int width, Rng& rng,
                                                   double std)
    : v(ps, name + ".v", width, width, rng, std), o(ps, name + ".o", width, width, rng, std) {}

Var SingleTokenSelfAttention::operator()(Tape& t, ParamStore& ps, const Var& x) const {
    return o(t, ps, v(t, ps, x));
}

FeedForward::FeedForward(ParamStore& ps, const std::string& name, int width, int hidden, Rng& rng, double std)
    : up(ps, name + ".up", width, hidden, rng, std), down(ps, name + ".down", hidden, width, rng, std) {}

Var FeedForward::operator()(Tape& t, ParamStore& ps, const Var& x) const {
    return down(t, ps, ag::gelu(up(t, ps, x)));
}

EncoderLayer::EncoderLayer(ParamStore& ps, const std::string& name, int width, int heads, int hidden, Rng& rng,
                           double std)
    : ln1(ps, name + ".ln1", width),
      ln2(ps, name + ".ln2", width),
      attn(ps, name + ".attn", width, heads, rng, std),
      ffn(ps, name + ".ffn", width, hidden, rng, std) {}

Var EncoderLayer::operator()(Tape& t, ParamStore& ps, const Var& x, int groups, int tokens) const {
    const Var h = ln1(t, ps, x);
    const Var y = ag::add(x, attn(t, ps, h, h, groups, tokens, tokens));
    return ag::add(y, ffn(t, ps, ln2(t, ps, y)));
}

DecoderLayer::DecoderLayer(ParamStore& ps, const std::string& name, int width, int heads, int hidden, Rng& rng,
                           double std)
    : ln1(ps, name + ".ln1", width),
      ln2(ps, name + ".ln2", width),
      ln3(ps, name + ".ln3", width),
      self(ps, name + ".self", width, rng, std),
      cross(ps, name + ".cross", width, heads, rng, std),
      ffn(ps, name + ".ffn", width, hidden, rng, std) {}

Var DecoderLayer::operator()(Tape& t, ParamStore& ps, const Var& x, const Var& memory, int groups, int tq,
                             int tk) const {
    Var y = ag::add(x, self(t, ps, ln1(t, ps, x)));
    y = ag::add(y, cross(t, ps, ln2(t, ps, y), memory, groups, tq, tk));
    return ag::add(y, ffn(t, ps, ln3(t, ps, y)));
}

double AdamW::step(ParamStore& ps) {
    auto& params = ps.all();
    if (m_.empty()) {
        for (const Parameter& p : params) {
            m_.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
            v_.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
        }
    }
    double norm2 = 0.0;
    for (const Parameter& p : params) norm2 += p.grad.squaredNorm();
    const double norm = std::sqrt(norm2);
    const double clip = (opt_.clip_norm > 0.0 && norm > opt_.clip_norm) ? opt_.clip_norm / norm : 1.0;
    ++t_;
    const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Parameter& p = params[i];
        if (p.decay && opt_.weight_decay > 0.0) p.value *= 1.0 - opt_.lr * opt_.weight_decay;
        m_[i] = opt_.beta1 * m_[i] + (1.0 - opt_.beta1) * clip * p.grad;
        v_[i] = opt_.beta2 * v_[i] + (1.0 - opt_.beta2) * (clip * p.grad).cwiseAbs2();
        p.value.array() -= opt_.lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + opt_.eps);
        p.grad.setZero();
    }
    return norm;
}

Mat position_encoding(int count, int width) {
    Mat pe(count, width);
    for (int pos = 0; pos < count; ++pos) {
        for (int i = 0; i < width; i += 2) {
            const double freq = std::pow(10000.0, -static_cast<double>(i) / width);
            pe(pos, i) = std::sin(pos * freq);
            if (i + 1 < width) pe(pos, i + 1) = std::cos(pos * freq);
        }
    }
    return pe;
}

Mat scalar_encoding(std::span<const double> values, int width, double f_lo, double f_hi) {
    const int pairs = width / 2;
    std::vector<double> freq(static_cast<std::size_t>(pairs));
    for (int i = 0; i < pairs; ++i) {
        const double u = pairs > 1 ? static_cast<double>(i) / (pairs - 1) : 0.0;
        freq[static_cast<std::size_t>(i)] = f_lo * std::pow(f_hi / f_lo, u);
    }
    Mat out = Mat::Zero(static_cast<Eigen::Index>(values.size()), width);
    for (std::size_t r = 0; r < values.size(); ++r) {
        for (int i = 0; i < pairs; ++i) {
            const double a = values[r] * freq[static_cast<std::size_t>(i)];
            out(static_cast<Eigen::Index>(r), 2 * i) = std::sin(a);
            out(static_cast<Eigen::Index>(r), 2 * i + 1) = std::cos(a);
        }
    }
    return out;
}

}  // namespace rcmodal::nn
