#include "rcmodal/autograd.hpp"

#include <cmath>
#include <numbers>

#include "rcmodal/error.hpp"

namespace rcmodal::ag {

Mat& Node::grad_buffer() {
    if (grad.size() == 0) grad = Mat::Zero(value().rows(), value().cols());
    return grad;
}

Var Tape::constant(Mat m) {
    auto node = std::make_unique<Node>();
    node->own = std::move(m);
    nodes_.push_back(std::move(node));
    return {this, nodes_.back().get()};
}

Var Tape::param(Parameter& p) {
    auto node = std::make_unique<Node>();
    node->ref = &p.value;
    node->needs_grad = record_;
    if (record_) {
        Node* raw = node.get();
        node->backward = [raw, &p] {
            if (p.grad.size() == 0) p.grad = Mat::Zero(p.value.rows(), p.value.cols());
            p.grad += raw->grad;
        };
    }
    nodes_.push_back(std::move(node));
    return {this, nodes_.back().get()};
}

Var Tape::make(Mat value, std::initializer_list<Var> inputs) {
    auto node = std::make_unique<Node>();
    node->own = std::move(value);
    if (record_) {
        for (const Var& v : inputs) node->needs_grad = node->needs_grad || v.node()->needs_grad;
    }
    nodes_.push_back(std::move(node));
    return {this, nodes_.back().get()};
}

void Tape::backward(const Var& loss) {
    if (loss.rows() != 1 || loss.cols() != 1) throw Error(ErrorKind::ShapeMismatch, "backward needs a 1x1 loss");
    loss.node()->grad_buffer()(0, 0) = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        Node& n = **it;
        if (n.needs_grad && n.backward && n.grad.size() != 0) n.backward();
    }
}

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw Error(ErrorKind::ShapeMismatch, what);
}

}  // namespace


Var matmul(const Var& a, const Var& b) {
    require(a.cols() == b.rows(), "matmul inner dimensions differ");
    Var out = a.tape()->make(a.value() * b.value(), {a, b});
    if (Node* o = out.node(); o->needs_grad) {
        Node* na = a.node();
        Node* nb = b.node();
        o->backward = [o, na, nb] {
            if (na->needs_grad) na->grad_buffer().noalias() += o->grad * nb->value().transpose();
            if (nb->needs_grad) nb->grad_buffer().noalias() += na->value().transpose() * o->grad;
        };
    }
    return out;
}

Var add(const Var& a, const Var& b) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), "add shapes differ");
    Var out = a.tape()->make(a.value() + b.value(), {a, b});
    if (Node* o = out.node(); o->needs_grad) {
        Node* na = a.node();
        Node* nb = b.node();
        o->backward = [o, na, nb] {
            if (na->needs_grad) na->grad_buffer() += o->grad;
            if (nb->needs_grad) nb->grad_buffer() += o->grad;
        };
    }
    return out;
}

Var add_row(const Var& x, const Var& row) {
    require(row.rows() == 1 && row.cols() == x.cols(), "add_row needs a 1 x cols row");
    Mat v = x.value();
    v.rowwise() += row.value().row(0);
    Var out = x.tape()->make(std::move(v), {x, row});
    if (Node* o = out.node(); o->needs_grad) {
        Node* nx = x.node();
        Node* nr = row.node();
        o->backward = [o, nx, nr] {
            if (nx->needs_grad) nx->grad_buffer() += o->grad;
            if (nr->needs_grad) nr->grad_buffer() += o->grad.colwise().sum();
        };
    }
    return out;
}

Var linear(const Var& x, const Var& w, const Var& b) {
    require(x.cols() == w.rows() && b.rows() == 1 && b.cols() == w.cols(), "linear shapes differ");
    Mat v(x.rows(), w.cols());
    v.noalias() = x.value() * w.value();
    v.rowwise() += b.value().row(0);
    Var out = x.tape()->make(std::move(v), {x, w, b});
    if (Node* o = out.node(); o->needs_grad) {
        Node* nx = x.node();
        Node* nw = w.node();
        Node* nb = b.node();
        o->backward = [o, nx, nw, nb] {
            if (nx->needs_grad) nx->grad_buffer().noalias() += o->grad * nw->value().transpose();
            if (nw->needs_grad) nw->grad_buffer().noalias() += nx->value().transpose() * o->grad;
            if (nb->needs_grad) nb->grad_buffer() += o->grad.colwise().sum();
        };
    }
    return out;
}

Var mul(const Var& a, const Var& b) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), "mul shapes differ");
    Var out = a.tape()->make(a.value().cwiseProduct(b.value()), {a, b});
    if (Node* o = out.node(); o->needs_grad) {
        Node* na = a.node();
        Node* nb = b.node();
        o->backward = [o, na, nb] {
            if (na->needs_grad) na->grad_buffer() += o->grad.cwiseProduct(nb->value());
            if (nb->needs_grad) nb->grad_buffer() += o->grad.cwiseProduct(na->value());
        };
    }
    return out;
}

Var scale(const Var& a, double k) {
    Var out = a.tape()->make(a.value() * k, {a});
    if (Node* o = out.node(); o->needs_grad) {
        Node* na = a.node();
        o->backward = [o, na, k] { na->grad_buffer() += o->grad * k; };
    }
    return out;
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

Var gelu(const Var& x) {
    constexpr double c = kGeluC;
    constexpr double a = kGeluA;
    const Mat& xv = x.value();
    Mat th = (c * (xv.array() + a * xv.array().cube())).tanh().matrix();
    Mat y = (0.5 * xv.array() * (1.0 + th.array())).matrix();
    Var out = x.tape()->make(std::move(y), {x});
    if (Node* o = out.node(); o->needs_grad) {
        Node* nx = x.node();
        o->backward = [o, nx, th = std::move(th)] {
            const auto xa = nx->value().array();
            const auto t = th.array();
            const auto d = 0.5 * (1.0 + t) + 0.5 * xa * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * xa * xa);
            nx->grad_buffer().array() += o->grad.array() * d;
        };
    }
    return out;
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
    require(gamma.rows() == 1 && gamma.cols() == x.cols() && beta.rows() == 1 && beta.cols() == x.cols(),
            "layer_norm parameter shapes differ");
    const Mat& xv = x.value();
    const Eigen::Index n = xv.cols();
    Mat xhat(xv.rows(), n);
    Eigen::VectorXd inv_std(xv.rows());
    for (Eigen::Index r = 0; r < xv.rows(); ++r) {
        const double mean = xv.row(r).mean();
        const double var = (xv.row(r).array() - mean).square().mean();
        inv_std(r) = 1.0 / std::sqrt(var + eps);
        xhat.row(r) = (xv.row(r).array() - mean) * inv_std(r);
    }
    Mat y = xhat;
    y.array().rowwise() *= gamma.value().row(0).array();
    y.rowwise() += beta.value().row(0);
    Var out = x.tape()->make(std::move(y), {x, gamma, beta});
    if (Node* o = out.node(); o->needs_grad) {
        Node* nx = x.node();
        Node* ng = gamma.node();
        Node* nb = beta.node();
        o->backward = [o, nx, ng, nb, xhat = std::move(xhat), inv_std = std::move(inv_std)] {
            const Mat& dy = o->grad;
            if (ng->needs_grad) ng->grad_buffer() += dy.cwiseProduct(xhat).colwise().sum();
            if (nb->needs_grad) nb->grad_buffer() += dy.colwise().sum();
            if (nx->needs_grad) {
                Mat dxhat = dy;
                dxhat.array().rowwise() *= ng->value().row(0).array();
                Mat& dx = nx->grad_buffer();
                for (Eigen::Index r = 0; r < dy.rows(); ++r) {
                    const double m1 = dxhat.row(r).mean();
                    const double m2 = dxhat.row(r).dot(xhat.row(r)) / static_cast<double>(dy.cols());
                    dx.row(r).array() += inv_std(r) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
                }
            }
        };
    }
    return out;
}

Var gather_rows(const Var& table, std::span<const int> index) {
    const Mat& t = table.value();
    Mat v(static_cast<Eigen::Index>(index.size()), t.cols());
    for (std::size_t i = 0; i < index.size(); ++i) {
        require(index[i] >= 0 && index[i] < t.rows(), "gather index out of range");
        v.row(static_cast<Eigen::Index>(i)) = t.row(index[i]);
    }
    Var out = table.tape()->make(std::move(v), {table});
    if (Node* o = out.node(); o->needs_grad) {
        Node* nt = table.node();
        o->backward = [o, nt, idx = std::vector<int>(index.begin(), index.end())] {
            Mat& g = nt->grad_buffer();
            for (std::size_t i = 0; i < idx.size(); ++i) g.row(idx[i]) += o->grad.row(static_cast<Eigen::Index>(i));
        };
    }
    return out;
}

Var interleave(std::span<const Var> parts) {
    require(!parts.empty(), "interleave needs at least one part");
    const Eigen::Index g = parts[0].rows();
    const Eigen::Index c = parts[0].cols();
    const auto t = static_cast<Eigen::Index>(parts.size());
    Mat v(g * t, c);
    for (Eigen::Index p = 0; p < t; ++p) {
        require(parts[static_cast<std::size_t>(p)].rows() == g && parts[static_cast<std::size_t>(p)].cols() == c,
                "interleave parts differ in shape");
        const Mat& src = parts[static_cast<std::size_t>(p)].value();
        for (Eigen::Index r = 0; r < g; ++r) v.row(r * t + p) = src.row(r);
    }
    Tape* tape = parts[0].tape();
    Var out = tape->make(std::move(v), {});
    Node* o = out.node();
    bool any = false;
    for (const Var& p : parts) any = any || p.node()->needs_grad;
    o->needs_grad = tape->recording() && any;
    if (o->needs_grad) {
        std::vector<Node*> srcs;
        for (const Var& p : parts) srcs.push_back(p.node());
        o->backward = [o, srcs = std::move(srcs), g, t] {
            for (Eigen::Index p = 0; p < t; ++p) {
                Node* s = srcs[static_cast<std::size_t>(p)];
                if (!s->needs_grad) continue;
                Mat& gs = s->grad_buffer();
                for (Eigen::Index r = 0; r < g; ++r) gs.row(r) += o->grad.row(r * t + p);
            }
        };
    }
    return out;
}

Var attention(const Var& q, const Var& k, const Var& v, int heads, int groups, int tq, int tk) {
    const Eigen::Index d = q.cols();
    require(heads > 0 && d % heads == 0, "width must be divisible by heads");
    require(q.rows() == Eigen::Index{groups} * tq && k.rows() == Eigen::Index{groups} * tk &&
                v.rows() == Eigen::Index{groups} * tk && k.cols() == d && v.cols() == d,
            "attention shapes differ");
    const Eigen::Index dh = d / heads;
    const double sc = 1.0 / std::sqrt(static_cast<double>(dh));
    const Mat& qv = q.value();
    const Mat& kv = k.value();
    const Mat& vv = v.value();
    Mat outv(qv.rows(), d);
    // Softmax weights per (group, head), stacked as (groups*heads*tq x tk).
    Mat probs(Eigen::Index{groups} * heads * tq, tk);
    for (int g = 0; g < groups; ++g) {
        for (int h = 0; h < heads; ++h) {
            const auto qh = qv.block(Eigen::Index{g} * tq, h * dh, tq, dh);
            const auto kh = kv.block(Eigen::Index{g} * tk, h * dh, tk, dh);
            const auto vh = vv.block(Eigen::Index{g} * tk, h * dh, tk, dh);
            auto p = probs.block((Eigen::Index{g} * heads + h) * tq, 0, tq, tk);
            p.noalias() = (qh * kh.transpose()) * sc;
            for (Eigen::Index r = 0; r < tq; ++r) {
                const double mx = p.row(r).maxCoeff();
                p.row(r) = (p.row(r).array() - mx).exp();
                p.row(r) /= p.row(r).sum();
            }
            outv.block(Eigen::Index{g} * tq, h * dh, tq, dh).noalias() = p * vh;
        }
    }
    Var out = q.tape()->make(std::move(outv), {q, k, v});
    if (Node* o = out.node(); o->needs_grad) {
        Node* nq = q.node();
        Node* nk = k.node();
        Node* nv = v.node();
        o->backward = [o, nq, nk, nv, probs = std::move(probs), heads, groups, tq, tk, dh, sc] {
            Mat& dq = nq->grad_buffer();
            Mat& dk = nk->grad_buffer();
            Mat& dv = nv->grad_buffer();
            Mat dp(tq, tk);
            for (int g = 0; g < groups; ++g) {
                for (int h = 0; h < heads; ++h) {
                    const auto p = probs.block((Eigen::Index{g} * heads + h) * tq, 0, tq, tk);
                    const auto dout = o->grad.block(Eigen::Index{g} * tq, h * dh, tq, dh);
                    const auto qh = nq->value().block(Eigen::Index{g} * tq, h * dh, tq, dh);
                    const auto kh = nk->value().block(Eigen::Index{g} * tk, h * dh, tk, dh);
                    const auto vh = nv->value().block(Eigen::Index{g} * tk, h * dh, tk, dh);
                    dv.block(Eigen::Index{g} * tk, h * dh, tk, dh).noalias() += p.transpose() * dout;
                    dp.noalias() = dout * vh.transpose();
                    for (Eigen::Index r = 0; r < tq; ++r) {
                        const double s = p.row(r).dot(dp.row(r));
                        dp.row(r) = p.row(r).array() * (dp.row(r).array() - s);
                    }
                    dq.block(Eigen::Index{g} * tq, h * dh, tq, dh).noalias() += (dp * kh) * sc;
                    dk.block(Eigen::Index{g} * tk, h * dh, tk, dh).noalias() += (dp.transpose() * qh) * sc;
                }
            }
        };
    }
    return out;
}

Var mse(const Var& pred, const Mat& target) {
    require(pred.rows() == target.rows() && pred.cols() == target.cols(), "mse shapes differ");
    const Mat diff = pred.value() - target;
    Mat v(1, 1);
    v(0, 0) = diff.squaredNorm() / static_cast<double>(diff.size());
    Var out = pred.tape()->make(std::move(v), {pred});
    if (Node* o = out.node(); o->needs_grad) {
        Node* np = pred.node();
        o->backward = [o, np, diff] {
            np->grad_buffer() += diff * (2.0 * o->grad(0, 0) / static_cast<double>(diff.size()));
        };
    }
    return out;
}

}  // namespace rcmodal::ag
