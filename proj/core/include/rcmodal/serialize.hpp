#pragma once

#include <string>
#include <string_view>

#include "rcmodal/decomposition.hpp"
#include "rcmodal/network.hpp"
#include "rcmodal/polynomial.hpp"

namespace rcmodal {

// Versioned JSON documents. Coefficients are ascending by degree. Parsers
// throw VersionMismatch for an unknown version and CorruptFile for anything
// malformed; element-level checks raise the usual InvalidArgument.

[[nodiscard]] std::string to_json(const TransferFunction& h);
[[nodiscard]] std::string to_json(const ModalDecomposition& d);
/// {"version":1,"topology":..,"r":[..],"c":[..],"input":..,"output":..};
/// trees also carry "parent".
[[nodiscard]] std::string to_json(const RcNetwork& net);

[[nodiscard]] TransferFunction transfer_function_from_json(std::string_view text);
[[nodiscard]] ModalDecomposition decomposition_from_json(std::string_view text);
[[nodiscard]] RcNetwork network_from_json(std::string_view text);

}  // namespace rcmodal
