#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rcmodal/polynomial.hpp"

namespace rcmodal {

enum class Topology { Ladder, Tree };

[[nodiscard]] std::string_view to_string(Topology t) noexcept;
[[nodiscard]] Topology parse_topology(std::string_view s);

struct Resistor {
    int from;  // -1 is the driver node
    int to;
    double ohms;
};

/// RC tree rooted at the driver. Node k has one capacitor to ground, c[k],
/// and one resistor r[k] to its upstream node parent[k] (-1 for the driver).
/// Ladders are the chain parent[k] = k - 1.
struct RcNetwork {
    Topology topology = Topology::Ladder;
    std::vector<int> parent;
    std::vector<double> r;
    std::vector<double> c;
    int input = 0;
    int output = 0;

    [[nodiscard]] int order() const noexcept { return static_cast<int>(c.size()); }
    [[nodiscard]] std::vector<Resistor> resistors() const;
    /// Resistance between the driver and the input node.
    [[nodiscard]] double driver_resistance() const { return r.at(static_cast<std::size_t>(input)); }

    /// Throws InvalidArgument on nonpositive elements, a non-tree parent list,
    /// more or fewer than one driver connection, or bad node ids.
    void validate() const;

    /// Same network with every resistor scaled by `k` (time constants scale by k).
    [[nodiscard]] RcNetwork scaled_resistance(double k) const;

    friend bool operator==(const RcNetwork&, const RcNetwork&) = default;
};

struct NetgenOptions {
    double r_min = 50.0;
    double r_max = 5e3;
    double c_min = 1e-15;
    double c_max = 100e-15;
    int max_attempts = 100;
};

/// Random network with `order` capacitors and log-uniform element values;
/// deterministic in `seed`. Draws that produce coincident poles are redrawn.
/// Throws UnsupportedOrder outside 1..10.
[[nodiscard]] RcNetwork generate_network(int order, Topology topology, std::uint64_t seed,
                                         const NetgenOptions& options = {});

/// Nodal form (G + sC) V = input * V_driver.
struct NodalSystem {
    Eigen::MatrixXd g;      // siemens
    Eigen::VectorXd c;      // diagonal of the capacitance matrix, farads
    Eigen::VectorXd input;  // conductance from the driver into each node
    int output = 0;

    [[nodiscard]] int order() const noexcept { return static_cast<int>(c.size()); }
};

[[nodiscard]] NodalSystem assemble_nodal(const RcNetwork& net);

/// H(s) = e_out^T (G + sC)^{-1} input, normalized so den(0) = 1.
///
/// When G is the Laplacian of an RC tree hanging from the driver (the case for
/// every generated network) the tree is recovered from the sparsity pattern
/// and tree_transfer_function is used. Other systems fall back to
/// leverrier_transfer_function. Throws SingularSystem for singular G or C.
[[nodiscard]] TransferFunction extract_transfer_function(const NodalSystem& sys);

/// Characteristic polynomial and adjugate of C^{-1}G by Leverrier-Faddeev.
/// Loses the slow poles once the eigenvalue spread exceeds ~1e4 at order >= 5.
[[nodiscard]] TransferFunction leverrier_transfer_function(const NodalSystem& sys);

/// Rebuilds the RC tree behind a nodal system, if G is a tree Laplacian.
[[nodiscard]] std::optional<RcNetwork> network_from_nodal(const NodalSystem& sys);

/// H(s) by recursive subtree admittances. Every coefficient is formed from
/// sums of products of positive element values, so there is no cancellation.
/// Normalized so den(0) = 1.
[[nodiscard]] TransferFunction tree_transfer_function(const RcNetwork& net);

}  // namespace rcmodal
