#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace rcmodal::ag {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Trainable tensor. `grad` accumulates across backward passes until zeroed.
struct Parameter {
    std::string name;
    Mat value;
    Mat grad;
    bool decay = true;  // subject to decoupled weight decay
};

class Tape;

struct Node {
    Mat own;
    const Mat* ref = nullptr;  // parameter value, not copied
    Mat grad;
    bool needs_grad = false;
    std::function<void()> backward;

    [[nodiscard]] const Mat& value() const noexcept { return ref ? *ref : own; }
    Mat& grad_buffer();
};

/// Handle to a tape node.
class Var {
public:
    Var() = default;
    Var(Tape* tape, Node* node) : tape_(tape), node_(node) {}

    [[nodiscard]] const Mat& value() const noexcept { return node_->value(); }
    [[nodiscard]] Eigen::Index rows() const noexcept { return value().rows(); }
    [[nodiscard]] Eigen::Index cols() const noexcept { return value().cols(); }
    [[nodiscard]] Node* node() const noexcept { return node_; }
    [[nodiscard]] Tape* tape() const noexcept { return tape_; }

private:
    Tape* tape_ = nullptr;
    Node* node_ = nullptr;
};

/// Records operations in creation order; backward() walks them in reverse.
class Tape {
public:
    /// When false, nothing needs gradients and no backward closures are kept.
    explicit Tape(bool record = true) : record_(record) {}

    Var constant(Mat m);
    Var param(Parameter& p);
    [[nodiscard]] bool recording() const noexcept { return record_; }

    /// Seeds d(loss)/d(loss) = 1 for a 1x1 loss and accumulates into every
    /// parameter reached.
    void backward(const Var& loss);

    Var make(Mat value, std::initializer_list<Var> inputs);

private:
    bool record_;
    std::vector<std::unique_ptr<Node>> nodes_;
};

// Shapes: x is rows x features. All ops broadcast nothing implicitly except
// where noted.

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
/// x (r x c) + row (1 x c) on every row.
Var add_row(const Var& x, const Var& row);
/// x W + b with W (in x out) and b (1 x out).
Var linear(const Var& x, const Var& w, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double k);
/// tanh approximation of GELU.
Var gelu(const Var& x);
/// Per-row layer normalization with gain and bias (1 x c).
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
/// Row lookup into table (n x c).
Var gather_rows(const Var& table, std::span<const int> index);
/// Interleaves T parts of shape (G x c) into (G*T x c); row g*T + t is part t row g.
Var interleave(std::span<const Var> parts);
/// Multi-head scaled dot-product attention for `groups` independent
/// sequences: q is (groups*tq x d), k and v are (groups*tk x d). Queries of a
/// group attend to that group's keys only.
Var attention(const Var& q, const Var& k, const Var& v, int heads, int groups, int tq, int tk);
/// Mean squared error against a constant target of the same shape; 1 x 1.
Var mse(const Var& pred, const Mat& target);

}  // namespace rcmodal::ag
