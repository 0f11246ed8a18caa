#pragma once

#include <vector>

#include "rcmodal/polynomial.hpp"

namespace rcmodal {

struct Root {
    Complex value;
    int multiplicity = 1;
};

struct RootOptions {
    int max_iterations = 500;
    /// Relative merge radius for coincident roots: |a - b| <= tol * max(1, |a|).
    double cluster_tol = 1e-8;
};

/// All roots of `den`, counted with multiplicity (sum of multiplicities equals
/// the degree). Roots are found by Aberth-Ehrlich iteration on the
/// scale-balanced monic polynomial, with a companion-matrix eigenvalue solve as
/// fallback. Near-coincident approximations are merged into one multiple root
/// when their spread is within the numerical splitting expected for that
/// multiplicity, then refined on the (k-1)-th derivative.
///
/// Output is sorted by descending real part, then descending imaginary part.
/// Throws NonConvergence if neither solver reaches tolerance.
[[nodiscard]] std::vector<Root> find_poles(const Polynomial& den, const RootOptions& options = {});

}  // namespace rcmodal
