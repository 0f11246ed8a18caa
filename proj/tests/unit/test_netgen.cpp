#include <catch_amalgamated.hpp>

#include <Eigen/Eigenvalues>
#include <algorithm>

#include "rcmodal/decomposition.hpp"
#include "rcmodal/error.hpp"
#include "rcmodal/network.hpp"
#include "rcmodal/serialize.hpp"

using namespace rcmodal;
using Catch::Approx;

namespace {

RcNetwork ladder(std::vector<double> r, std::vector<double> c) {
    RcNetwork n;
    n.topology = Topology::Ladder;
    for (std::size_t k = 0; k < c.size(); ++k) n.parent.push_back(static_cast<int>(k) - 1);
    n.r = std::move(r);
    n.c = std::move(c);
    n.output = n.order() - 1;
    return n;
}

// Eigenvalues of -C^-1 G via the symmetric pencil C^-1/2 G C^-1/2.
std::vector<double> pencil_poles(const NodalSystem& sys) {
    const Eigen::VectorXd d = sys.c.cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd m = d.asDiagonal() * sys.g * d.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    std::vector<double> out;
    for (double v : es.eigenvalues()) out.push_back(-v);
    std::sort(out.begin(), out.end(), std::greater<>());
    return out;
}

}  // namespace

TEST_CASE("generate_network structure", "[netgen]") {
    const RcNetwork n = generate_network(1, Topology::Ladder, 42);
    CHECK(n.order() == 1);
    CHECK(n.r.size() == 1);
    const TransferFunction h = extract_transfer_function(assemble_nodal(n));
    CHECK(h.order() == 1);
    CHECK(h.num().degree() < 1);
}

TEST_CASE("generate_network is deterministic", "[netgen]") {
    for (auto topo : {Topology::Ladder, Topology::Tree}) {
        CHECK(generate_network(6, topo, 99) == generate_network(6, topo, 99));
        CHECK_FALSE(generate_network(6, topo, 99) == generate_network(6, topo, 100));
    }
}

TEST_CASE("generate_network rejects unsupported orders", "[netgen]") {
    for (int order : {0, 11, -3}) {
        CHECK_THROWS_MATCHES(generate_network(order, Topology::Ladder, 1), Error,
                             Catch::Matchers::Predicate<Error>(
                                 [](const Error& e) { return e.kind() == ErrorKind::UnsupportedOrder; }));
    }
}

TEST_CASE("element values stay in range", "[netgen]") {
    const NetgenOptions opt;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const RcNetwork n = generate_network(10, seed % 2 ? Topology::Tree : Topology::Ladder, seed);
        REQUIRE_NOTHROW(n.validate());
        for (double r : n.r) CHECK((r >= opt.r_min && r <= opt.r_max));
        for (double c : n.c) CHECK((c >= opt.c_min && c <= opt.c_max));
    }
}

TEST_CASE("order-3 ladder has three negative real poles", "[netgen]") {
    const RcNetwork n = generate_network(3, Topology::Ladder, 7);
    const NodalSystem sys = assemble_nodal(n);
    const auto roots = find_poles(extract_transfer_function(sys).den());
    REQUIRE(roots.size() == 3);
    const auto oracle = pencil_poles(sys);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(roots[i].multiplicity == 1);
        CHECK(roots[i].value.imag() == 0.0);
        CHECK(roots[i].value.real() < 0.0);
        CHECK(roots[i].value.real() == Approx(oracle[i]).epsilon(1e-8));
    }
}

TEST_CASE("assemble_nodal examples", "[netgen]") {
    NodalSystem s = assemble_nodal(ladder({1.0}, {1.0}));
    CHECK(s.g(0, 0) == 1.0);
    CHECK(s.c(0) == 1.0);

    s = assemble_nodal(ladder({1.0, 1.0}, {1.0, 1.0}));
    Eigen::MatrixXd g(2, 2);
    g << 2, -1, -1, 1;
    CHECK(s.g == g);
    CHECK(s.c == Eigen::Vector2d(1, 1));
    CHECK(s.input == Eigen::Vector2d(1, 0));
}

TEST_CASE("KCL: rows of G sum to the driver conductance", "[netgen]") {
    const RcNetwork n = generate_network(8, Topology::Tree, 3);
    const NodalSystem s = assemble_nodal(n);
    for (int i = 0; i < s.order(); ++i) CHECK(s.g.row(i).sum() == Approx(s.input(i)).margin(1e-15));
    CHECK((s.g - s.g.transpose()).norm() == 0.0);
}

TEST_CASE("extract_transfer_function examples", "[netgen]") {
    TransferFunction h = extract_transfer_function(assemble_nodal(ladder({1.0}, {1.0})));
    CHECK(h.num() == Polynomial{1});
    CHECK(h.den() == Polynomial{1, 1});

    h = extract_transfer_function(assemble_nodal(ladder({1.0, 1.0}, {1.0, 1.0})));
    CHECK(h.num()[0] == Approx(1.0));
    CHECK(h.den()[0] == Approx(1.0));
    CHECK(h.den()[1] == Approx(3.0));
    CHECK(h.den()[2] == Approx(1.0));
}

TEST_CASE("extracted poles equal pencil eigenvalues", "[netgen]") {
    for (int order = 1; order <= 10; ++order) {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const RcNetwork n = generate_network(order, seed % 2 ? Topology::Tree : Topology::Ladder, seed);
            const NodalSystem sys = assemble_nodal(n);
            const TransferFunction h = extract_transfer_function(sys);
            REQUIRE(h.order() == order);
            CHECK(h.dc_gain() == Approx(1.0).epsilon(1e-12));
            const auto roots = find_poles(h.den());
            const auto oracle = pencil_poles(sys);
            REQUIRE(roots.size() == static_cast<std::size_t>(order));
            for (std::size_t i = 0; i < roots.size(); ++i) {
                CHECK(std::abs(roots[i].value.imag()) < 1e-8 * std::abs(roots[i].value));
                CHECK(roots[i].value.real() == Approx(oracle[i]).epsilon(1e-8));
            }
        }
    }
}

TEST_CASE("scaling R by k and C by 1/k keeps the poles", "[netgen]") {
    const RcNetwork n = generate_network(5, Topology::Ladder, 12);
    RcNetwork m = n.scaled_resistance(7.0);
    for (double& c : m.c) c /= 7.0;
    const auto a = find_poles(extract_transfer_function(assemble_nodal(n)).den());
    const auto b = find_poles(extract_transfer_function(assemble_nodal(m)).den());
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i].value.real() == Approx(a[i].value.real()).epsilon(1e-10));
}

TEST_CASE("tree recursion agrees with Leverrier-Faddeev at low order", "[netgen]") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const NodalSystem sys = assemble_nodal(generate_network(4, Topology::Tree, seed));
        const TransferFunction a = extract_transfer_function(sys);
        const TransferFunction b = leverrier_transfer_function(sys);
        for (double w : {1e8, 1e10, 1e12}) {
            const Complex s(0.0, w);
            CHECK(std::abs(a(s) - b(s)) < 1e-7 * std::abs(a(s)));
        }
    }
}

TEST_CASE("network_from_nodal recovers generated trees", "[netgen]") {
    const RcNetwork n = generate_network(7, Topology::Tree, 5);
    const auto back = network_from_nodal(assemble_nodal(n));
    REQUIRE(back.has_value());
    CHECK(back->parent == n.parent);
    for (std::size_t k = 0; k < n.r.size(); ++k) CHECK(back->r[k] == Approx(n.r[k]).epsilon(1e-12));
}

TEST_CASE("singular systems are reported", "[netgen]") {
    NodalSystem s = assemble_nodal(ladder({1.0, 1.0}, {1.0, 1.0}));
    s.c(1) = 0.0;
    CHECK_THROWS_MATCHES(extract_transfer_function(s), Error, Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.kind() == ErrorKind::SingularSystem;
                         }));
}

TEST_CASE("network validation", "[netgen]") {
    RcNetwork n = ladder({1.0, -1.0}, {1.0, 1.0});
    CHECK_THROWS_AS(n.validate(), Error);
    n = ladder({1.0, 1.0}, {1.0, 1.0});
    n.parent = {-1, -1};
    CHECK_THROWS_AS(n.validate(), Error);
}

TEST_CASE("network JSON round trip", "[netgen]") {
    const RcNetwork n = generate_network(6, Topology::Tree, 21);
    CHECK(network_from_json(to_json(n)) == n);
    const RcNetwork l = network_from_json(R"({"version":1,"topology":"ladder","r":[1,2],"c":[3,4],"input":0,"output":1})");
    CHECK(l.parent == std::vector<int>{-1, 0});
    CHECK_THROWS_AS(network_from_json(R"({"version":1,"topology":"ladder","r":[1],"c":[3,4],"input":0,"output":1})"),
                    Error);
}
