#include "rcmodal/network.hpp"

#include <algorithm>
#include <cmath>

#include "rcmodal/error.hpp"
#include "rcmodal/rng.hpp"
#include "rcmodal/roots.hpp"

namespace rcmodal {

std::string_view to_string(Topology t) noexcept { return t == Topology::Ladder ? "ladder" : "tree"; }

Topology parse_topology(std::string_view s) {
    if (s == "ladder") return Topology::Ladder;
    if (s == "tree") return Topology::Tree;
    throw Error(ErrorKind::InvalidArgument, "unknown topology '" + std::string(s) + "'");
}

std::vector<Resistor> RcNetwork::resistors() const {
    std::vector<Resistor> out;
    out.reserve(r.size());
    for (std::size_t k = 0; k < r.size(); ++k) {
        out.push_back({parent[k], static_cast<int>(k), r[k]});
    }
    return out;
}

void RcNetwork::validate() const {
    const int n = order();
    if (n < 1) throw Error(ErrorKind::InvalidArgument, "network has no capacitors");
    if (static_cast<int>(r.size()) != n || static_cast<int>(parent.size()) != n) {
        throw Error(ErrorKind::InvalidArgument, "r, c and parent must all have one entry per node");
    }
    for (int k = 0; k < n; ++k) {
        const auto i = static_cast<std::size_t>(k);
        if (!(r[i] > 0.0) || !std::isfinite(r[i])) throw Error(ErrorKind::InvalidArgument, "resistance must be > 0");
        if (!(c[i] > 0.0) || !std::isfinite(c[i])) throw Error(ErrorKind::InvalidArgument, "capacitance must be > 0");
        if (parent[i] < -1 || parent[i] >= n || parent[i] == k) {
            throw Error(ErrorKind::InvalidArgument, "bad parent id at node " + std::to_string(k));
        }
    }
    if (std::count(parent.begin(), parent.end(), -1) != 1) {
        throw Error(ErrorKind::InvalidArgument, "exactly one node must connect to the driver");
    }
    if (input < 0 || input >= n || parent[static_cast<std::size_t>(input)] != -1) {
        throw Error(ErrorKind::InvalidArgument, "input must be the node attached to the driver");
    }
    if (output < 0 || output >= n) throw Error(ErrorKind::InvalidArgument, "output node out of range");
    // Every node must reach the driver without a cycle.
    for (int k = 0; k < n; ++k) {
        int cur = k;
        for (int steps = 0; cur != -1; ++steps) {
            if (steps > n) throw Error(ErrorKind::InvalidArgument, "parent list contains a cycle");
            cur = parent[static_cast<std::size_t>(cur)];
        }
    }
}

RcNetwork RcNetwork::scaled_resistance(double k) const {
    RcNetwork out = *this;
    for (double& x : out.r) x *= k;
    return out;
}

namespace {

RcNetwork draw_network(int order, Topology topology, Rng& rng, const NetgenOptions& o) {
    RcNetwork net;
    net.topology = topology;
    const auto n = static_cast<std::size_t>(order);
    net.parent.assign(n, -1);
    net.r.resize(n);
    net.c.resize(n);
    std::vector<int> children(n, 0);
    std::vector<int> depth(n, 0);
    for (std::size_t k = 0; k < n; ++k) {
        net.r[k] = log_uniform(rng, o.r_min, o.r_max);
        net.c[k] = log_uniform(rng, o.c_min, o.c_max);
        if (k == 0) continue;
        int p = static_cast<int>(k) - 1;
        if (topology == Topology::Tree) {
            std::vector<int> open;
            for (std::size_t j = 0; j < k; ++j) {
                if (children[j] < 2) open.push_back(static_cast<int>(j));
            }
            p = open[uniform_index(rng, open.size())];
        }
        net.parent[k] = p;
        ++children[static_cast<std::size_t>(p)];
        depth[k] = depth[static_cast<std::size_t>(p)] + 1;
    }
    net.input = 0;
    int out = 0;
    for (std::size_t k = 0; k < n; ++k) {
        if (children[k] == 0 && depth[k] >= depth[static_cast<std::size_t>(out)]) out = static_cast<int>(k);
    }
    net.output = out;
    return net;
}

bool poles_distinct(const RcNetwork& net) {
    const std::vector<Root> roots = find_poles(tree_transfer_function(net).den());
    RootOptions defaults;
    for (std::size_t i = 0; i < roots.size(); ++i) {
        if (roots[i].multiplicity != 1) return false;
        for (std::size_t j = i + 1; j < roots.size(); ++j) {
            const double scale = std::max(1.0, std::abs(roots[i].value));
            if (std::abs(roots[i].value - roots[j].value) <= defaults.cluster_tol * scale) return false;
        }
    }
    return true;
}

std::vector<std::vector<int>> children_of(const RcNetwork& net) {
    std::vector<std::vector<int>> ch(net.c.size());
    for (std::size_t k = 0; k < net.parent.size(); ++k) {
        if (net.parent[k] >= 0) ch[static_cast<std::size_t>(net.parent[k])].push_back(static_cast<int>(k));
    }
    return ch;
}

// Nodes ordered so every child precedes its parent.
std::vector<int> postorder(const RcNetwork& net, const std::vector<std::vector<int>>& ch) {
    std::vector<int> order;
    std::vector<std::pair<int, std::size_t>> stack{{net.input, 0}};
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        const auto& kids = ch[static_cast<std::size_t>(node)];
        if (next < kids.size()) {
            const int child = kids[next++];
            stack.emplace_back(child, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    return order;
}

}  // namespace

RcNetwork generate_network(int order, Topology topology, std::uint64_t seed, const NetgenOptions& options) {
    if (order < 1 || order > 10) {
        throw Error(ErrorKind::UnsupportedOrder, "order " + std::to_string(order) + " outside 1..10");
    }
    Rng rng(seed);
    for (int attempt = 0; attempt < options.max_attempts; ++attempt) {
        RcNetwork net = draw_network(order, topology, rng, options);
        if (poles_distinct(net)) return net;
    }
    throw Error(ErrorKind::NonConvergence, "could not draw a network with distinct poles");
}

NodalSystem assemble_nodal(const RcNetwork& net) {
    net.validate();
    const int n = net.order();
    NodalSystem sys;
    sys.g = Eigen::MatrixXd::Zero(n, n);
    sys.c = Eigen::VectorXd::Zero(n);
    sys.input = Eigen::VectorXd::Zero(n);
    sys.output = net.output;
    for (int k = 0; k < n; ++k) {
        const auto i = static_cast<std::size_t>(k);
        const double g = 1.0 / net.r[i];
        sys.c(k) = net.c[i];
        sys.g(k, k) += g;
        const int p = net.parent[i];
        if (p < 0) {
            sys.input(k) += g;
        } else {
            sys.g(p, p) += g;
            sys.g(k, p) -= g;
            sys.g(p, k) -= g;
        }
    }
    return sys;
}

TransferFunction leverrier_transfer_function(const NodalSystem& sys) {
    const int n = sys.order();
    if (n < 1 || sys.g.rows() != n || sys.g.cols() != n || sys.input.size() != n) {
        throw Error(ErrorKind::InvalidArgument, "inconsistent nodal system dimensions");
    }
    if ((sys.c.array() <= 0.0).any()) throw Error(ErrorKind::SingularSystem, "capacitance matrix is singular");
    Eigen::FullPivLU<Eigen::MatrixXd> lu(sys.g);
    if (!lu.isInvertible()) throw Error(ErrorKind::SingularSystem, "conductance matrix is singular");

    // det(G + sC) is proportional to det(sI - M), M = -C^{-1} G. Work with
    // M / omega so the recursion stays near unit scale.
    Eigen::MatrixXd m = -(sys.c.cwiseInverse().asDiagonal() * sys.g);
    const double omega = m.diagonal().cwiseAbs().maxCoeff();
    m /= omega;
    const Eigen::VectorXd u = sys.input.cwiseQuotient(sys.c);

    std::vector<double> den_hat(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<double> num_hat(static_cast<std::size_t>(n), 0.0);
    den_hat[static_cast<std::size_t>(n)] = 1.0;
    Eigen::MatrixXd mk = Eigen::MatrixXd::Identity(n, n);
    const auto ident = Eigen::MatrixXd::Identity(n, n);
    for (int k = 0; k < n; ++k) {
        // adj(xI - M) = sum_k M_k x^{n-1-k}
        num_hat[static_cast<std::size_t>(n - 1 - k)] = (mk * u)(sys.output);
        const Eigen::MatrixXd prod = m * mk;
        const double ck = -prod.trace() / (k + 1);
        den_hat[static_cast<std::size_t>(n - 1 - k)] = ck;
        mk = prod + ck * ident;
    }
    // x = s / omega; the 1/omega from (sI - M)^{-1} goes into the numerator.
    std::vector<double> den(den_hat.size()), num(num_hat.size());
    double pw = 1.0;
    for (std::size_t k = 0; k < den.size(); ++k) {
        den[k] = den_hat[k] / pw;
        if (k < num.size()) num[k] = num_hat[k] / (pw * omega);
        pw *= omega;
    }
    const double d0 = den[0];
    if (d0 == 0.0) throw Error(ErrorKind::SingularSystem, "zero DC determinant");
    for (double& x : den) x /= d0;
    for (double& x : num) x /= d0;
    return TransferFunction(Polynomial(std::move(num)), Polynomial(std::move(den)));
}

std::optional<RcNetwork> network_from_nodal(const NodalSystem& sys) {
    const int n = sys.order();
    if (n < 1 || sys.g.rows() != n || sys.g.cols() != n || sys.input.size() != n) return std::nullopt;
    int driven = -1;
    for (int k = 0; k < n; ++k) {
        if (sys.input(k) != 0.0) {
            if (driven != -1 || sys.input(k) < 0.0) return std::nullopt;
            driven = k;
        }
    }
    if (driven < 0) return std::nullopt;
    // Breadth-first walk over the off-diagonal pattern; a tree has exactly
    // n - 1 negative symmetric couplings and reaches every node.
    RcNetwork net;
    net.topology = Topology::Tree;
    net.parent.assign(static_cast<std::size_t>(n), -2);
    net.r.assign(static_cast<std::size_t>(n), 0.0);
    net.c.assign(sys.c.data(), sys.c.data() + n);
    net.input = driven;
    net.output = sys.output;
    net.parent[static_cast<std::size_t>(driven)] = -1;
    net.r[static_cast<std::size_t>(driven)] = 1.0 / sys.input(driven);
    std::vector<int> queue{driven};
    int edges = 0;
    for (std::size_t head = 0; head < queue.size(); ++head) {
        const int a = queue[head];
        for (int b = 0; b < n; ++b) {
            if (b == a || sys.g(a, b) == 0.0) continue;
            if (sys.g(a, b) > 0.0 || sys.g(a, b) != sys.g(b, a)) return std::nullopt;
            if (net.parent[static_cast<std::size_t>(b)] == -2) {
                net.parent[static_cast<std::size_t>(b)] = a;
                net.r[static_cast<std::size_t>(b)] = -1.0 / sys.g(a, b);
                queue.push_back(b);
                ++edges;
            } else if (net.parent[static_cast<std::size_t>(a)] != b) {
                return std::nullopt;  // cycle
            }
        }
    }
    if (edges != n - 1 || static_cast<int>(queue.size()) != n) return std::nullopt;
    // Diagonal must equal the sum of incident conductances (no shunt resistors).
    for (int k = 0; k < n; ++k) {
        double expected = sys.input(k);
        for (int b = 0; b < n; ++b) {
            if (b != k) expected -= sys.g(k, b);
        }
        if (std::abs(sys.g(k, k) - expected) > 1e-12 * std::abs(sys.g(k, k))) return std::nullopt;
    }
    bool chain = true;
    for (int k = 0; k < n && chain; ++k) chain = net.parent[static_cast<std::size_t>(k)] == k - 1;
    if (chain) net.topology = Topology::Ladder;
    return net;
}

TransferFunction extract_transfer_function(const NodalSystem& sys) {
    if ((sys.c.array() <= 0.0).any()) throw Error(ErrorKind::SingularSystem, "capacitance matrix is singular");
    if (auto net = network_from_nodal(sys)) return tree_transfer_function(*net);
    return leverrier_transfer_function(sys);
}

TransferFunction tree_transfer_function(const RcNetwork& net) {
    net.validate();
    const auto ch = children_of(net);
    const auto n = net.c.size();
    std::vector<Polynomial> p(n), q(n), s(n);
    for (int node : postorder(net, ch)) {
        const auto k = static_cast<std::size_t>(node);
        Polynomial qk{1.0};
        for (int c : ch[k]) qk = qk * s[static_cast<std::size_t>(c)];
        Polynomial pk = Polynomial{0.0, net.c[k]} * qk;
        for (int c : ch[k]) {
            Polynomial term = p[static_cast<std::size_t>(c)];
            for (int other : ch[k]) {
                if (other != c) term = term * s[static_cast<std::size_t>(other)];
            }
            pk = pk + term;
        }
        s[k] = qk + net.r[k] * pk;
        p[k] = std::move(pk);
        q[k] = std::move(qk);
    }
    // V_k / V_parent = Q_k / S_k along the driver-to-output path; the product
    // telescopes to (side-branch S products) * Q_out / S_input.
    std::vector<int> path;
    for (int cur = net.output; cur != -1; cur = net.parent[static_cast<std::size_t>(cur)]) path.push_back(cur);
    std::reverse(path.begin(), path.end());
    Polynomial num = q[static_cast<std::size_t>(net.output)];
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        for (int c : ch[static_cast<std::size_t>(path[i])]) {
            if (c != path[i + 1]) num = num * s[static_cast<std::size_t>(c)];
        }
    }
    return TransferFunction(std::move(num), s[static_cast<std::size_t>(net.input)]);
}

}  // namespace rcmodal
