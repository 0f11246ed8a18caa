#include "rcmodal/serialize.hpp"

#include <json.hpp>

#include "rcmodal/error.hpp"

namespace rcmodal {
namespace {

using nlohmann::json;

constexpr int kVersion = 1;

json parse_versioned(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::CorruptFile, e.what());
    }
    if (!j.is_object() || !j.contains("version")) throw Error(ErrorKind::CorruptFile, "missing version field");
    if (j["version"] != kVersion) {
        throw Error(ErrorKind::VersionMismatch, "unsupported document version " + j["version"].dump());
    }
    return j;
}

template <typename F>
auto guarded(F&& f) {
    try {
        return f();
    } catch (const json::exception& e) {
        throw Error(ErrorKind::CorruptFile, e.what());
    }
}

std::vector<double> coeff_vector(const Polynomial& p) { return {p.coeffs().begin(), p.coeffs().end()}; }

}  // namespace

std::string to_json(const TransferFunction& h) {
    json j{{"version", kVersion}, {"num", coeff_vector(h.num())}, {"den", coeff_vector(h.den())}};
    return j.dump();
}

std::string to_json(const ModalDecomposition& d) {
    json modes = json::array();
    for (const Mode& m : d.modes) {
        modes.push_back({{"pole_re", m.pole.real()},
                         {"pole_im", m.pole.imag()},
                         {"residue_re", m.residue.real()},
                         {"residue_im", m.residue.imag()},
                         {"j", m.power}});
    }
    json j{{"version", kVersion}, {"source_order", d.source_order}, {"modes", modes}};
    return j.dump();
}

std::string to_json(const RcNetwork& net) {
    json j{{"version", kVersion},
           {"topology", std::string(to_string(net.topology))},
           {"r", net.r},
           {"c", net.c},
           {"input", net.input},
           {"output", net.output}};
    if (net.topology == Topology::Tree) j["parent"] = net.parent;
    return j.dump();
}

TransferFunction transfer_function_from_json(std::string_view text) {
    const json j = parse_versioned(text);
    return guarded([&] {
        return TransferFunction(Polynomial(j.at("num").get<std::vector<double>>()),
                                Polynomial(j.at("den").get<std::vector<double>>()));
    });
}

ModalDecomposition decomposition_from_json(std::string_view text) {
    const json j = parse_versioned(text);
    return guarded([&] {
        ModalDecomposition d;
        for (const json& m : j.at("modes")) {
            Mode mode{Complex(m.at("pole_re").get<double>(), m.at("pole_im").get<double>()),
                      Complex(m.at("residue_re").get<double>(), m.at("residue_im").get<double>()),
                      m.at("j").get<int>()};
            if (mode.power < 1) throw Error(ErrorKind::InvalidArgument, "mode power must be >= 1");
            d.modes.push_back(mode);
        }
        // A k-fold pole contributes k modes, so the mode count is the order.
        d.source_order = j.value("source_order", static_cast<int>(d.modes.size()));
        return d;
    });
}

RcNetwork network_from_json(std::string_view text) {
    const json j = parse_versioned(text);
    RcNetwork net = guarded([&] {
        RcNetwork n;
        n.topology = parse_topology(j.at("topology").get<std::string>());
        n.r = j.at("r").get<std::vector<double>>();
        n.c = j.at("c").get<std::vector<double>>();
        n.input = j.value("input", 0);
        n.output = j.value("output", static_cast<int>(n.c.size()) - 1);
        if (j.contains("parent")) {
            n.parent = j.at("parent").get<std::vector<int>>();
        } else {
            if (n.topology == Topology::Tree) throw Error(ErrorKind::CorruptFile, "tree network without parent list");
            for (std::size_t k = 0; k < n.c.size(); ++k) n.parent.push_back(static_cast<int>(k) - 1);
        }
        return n;
    });
    net.validate();
    return net;
}

}  // namespace rcmodal
