#include "rcmodal/roots.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "rcmodal/error.hpp"

namespace rcmodal {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

struct Evaluation {
    Complex value;
    Complex slope;
    double bound;  // sum |c_k| |z|^k, the rounding-error scale of `value`
};

Evaluation evaluate(std::span<const double> c, Complex z) {
    Complex p(0.0), dp(0.0);
    double bound = 0.0;
    const double az = std::abs(z);
    for (auto it = c.rbegin(); it != c.rend(); ++it) {
        dp = dp * z + p;
        p = p * z + *it;
        bound = bound * az + std::abs(*it);
    }
    return {p, dp, bound};
}

Complex evaluate_derivative(std::span<const double> c, int order, Complex z) {
    // d^order/dz^order of sum c_k z^k
    Complex acc(0.0);
    for (int k = static_cast<int>(c.size()) - 1; k >= order; --k) {
        double falling = 1.0;
        for (int j = 0; j < order; ++j) falling *= static_cast<double>(k - j);
        acc = acc * z + falling * c[static_cast<std::size_t>(k)];
    }
    return acc;
}

// Initial guesses from the upper convex hull of (k, log|c_k|): each hull
// segment contributes roots on a circle whose radius matches the segment slope.
std::vector<Complex> initial_guesses(std::span<const double> c) {
    const int m = static_cast<int>(c.size()) - 1;
    std::vector<int> hull;
    std::vector<double> logc(c.size());
    for (std::size_t k = 0; k < c.size(); ++k) {
        logc[k] = c[k] != 0.0 ? std::log(std::abs(c[k])) : -std::numeric_limits<double>::infinity();
    }
    for (int k = 0; k <= m; ++k) {
        if (!std::isfinite(logc[static_cast<std::size_t>(k)])) continue;
        while (hull.size() >= 2) {
            const int a = hull[hull.size() - 2];
            const int b = hull.back();
            const double cross = (b - a) * (logc[static_cast<std::size_t>(k)] - logc[static_cast<std::size_t>(a)]) -
                                 (k - a) * (logc[static_cast<std::size_t>(b)] - logc[static_cast<std::size_t>(a)]);
            if (cross >= 0.0) {
                hull.pop_back();
            } else {
                break;
            }
        }
        hull.push_back(k);
    }
    std::vector<Complex> z;
    z.reserve(static_cast<std::size_t>(m));
    const double offset = 0.4;
    for (std::size_t h = 0; h + 1 < hull.size(); ++h) {
        const int a = hull[h];
        const int b = hull[h + 1];
        const int count = b - a;
        const double radius =
            std::exp((logc[static_cast<std::size_t>(a)] - logc[static_cast<std::size_t>(b)]) / count);
        for (int i = 0; i < count; ++i) {
            const double angle = 2.0 * std::numbers::pi * i / count + 2.0 * std::numbers::pi * h / m + offset;
            z.push_back(std::polar(radius, angle));
        }
    }
    return z;
}

bool aberth(std::span<const double> c, std::vector<Complex>& z, int max_iterations) {
    const std::size_t m = z.size();
    std::vector<bool> done(m, false);
    for (int iter = 0; iter < max_iterations; ++iter) {
        bool all_done = true;
        for (std::size_t k = 0; k < m; ++k) {
            if (done[k]) continue;
            const Evaluation e = evaluate(c, z[k]);
            if (std::abs(e.value) <= 4.0 * kEps * e.bound) {
                done[k] = true;
                continue;
            }
            all_done = false;
            Complex ratio = e.slope != Complex(0.0) ? e.value / e.slope : Complex(1e-3, 1e-3);
            Complex sum(0.0);
            for (std::size_t j = 0; j < m; ++j) {
                if (j != k) sum += 1.0 / (z[k] - z[j]);
            }
            const Complex w = ratio / (1.0 - ratio * sum);
            z[k] -= w;
            if (std::abs(w) <= kEps * std::abs(z[k])) done[k] = true;
        }
        if (all_done) return true;
    }
    return std::all_of(done.begin(), done.end(), [](bool d) { return d; });
}

bool companion_roots(std::span<const double> c, std::vector<Complex>& z) {
    const int m = static_cast<int>(c.size()) - 1;
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(m, m);
    for (int i = 1; i < m; ++i) companion(i, i - 1) = 1.0;
    for (int i = 0; i < m; ++i) companion(i, m - 1) = -c[static_cast<std::size_t>(i)] / c.back();
    Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
    if (solver.info() != Eigen::Success) return false;
    z.assign(static_cast<std::size_t>(m), Complex(0.0));
    for (int i = 0; i < m; ++i) {
        z[static_cast<std::size_t>(i)] = solver.eigenvalues()(i);
        if (!std::isfinite(z[static_cast<std::size_t>(i)].real()) ||
            !std::isfinite(z[static_cast<std::size_t>(i)].imag())) {
            return false;
        }
    }
    return true;
}

double scale_of(Complex z) { return std::max(1.0, std::abs(z)); }

// Radius within which k approximations of one k-fold root are expected to
// scatter under double-precision coefficient rounding.
double splitting_radius(int k, double cluster_tol) {
    return std::max(cluster_tol, 10.0 * std::pow(1e3 * kEps, 1.0 / k));
}

std::vector<Root> cluster(std::span<const double> c, const std::vector<Complex>& z, double cluster_tol) {
    const std::size_t m = z.size();
    // Single-linkage components under a loose candidate radius.
    std::vector<std::size_t> parent(m);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    };
    const double candidate = 5e-3;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            if (std::abs(z[i] - z[j]) <= candidate * std::max(scale_of(z[i]), scale_of(z[j]))) {
                parent[find(i)] = find(j);
            }
        }
    }
    std::vector<std::vector<std::size_t>> groups(m);
    for (std::size_t i = 0; i < m; ++i) groups[find(i)].push_back(i);

    std::vector<Root> out;
    for (const auto& g : groups) {
        if (g.empty()) continue;
        const int k = static_cast<int>(g.size());
        if (k == 1) {
            out.push_back({z[g[0]], 1});
            continue;
        }
        Complex centroid(0.0);
        for (std::size_t i : g) centroid += z[i];
        centroid /= static_cast<double>(k);
        double spread = 0.0;
        for (std::size_t i : g) spread = std::max(spread, std::abs(z[i] - centroid));
        if (spread > splitting_radius(k, cluster_tol) * scale_of(centroid)) {
            for (std::size_t i : g) out.push_back({z[i], 1});
            continue;
        }
        // The k-fold root is a simple root of the (k-1)-th derivative.
        Complex x = centroid;
        double best = std::abs(evaluate_derivative(c, k - 1, x));
        for (int it = 0; it < 20 && best > 0.0; ++it) {
            const Complex f = evaluate_derivative(c, k - 1, x);
            const Complex df = evaluate_derivative(c, k, x);
            if (df == Complex(0.0)) break;
            const Complex next = x - f / df;
            const double val = std::abs(evaluate_derivative(c, k - 1, next));
            if (!(val < best)) break;
            best = val;
            x = next;
        }
        out.push_back({x, k});
    }
    return out;
}

void polish_simple(std::span<const double> c, std::vector<Root>& roots) {
    for (Root& r : roots) {
        if (r.multiplicity != 1) continue;
        for (int it = 0; it < 3; ++it) {
            const Evaluation e = evaluate(c, r.value);
            if (e.slope == Complex(0.0)) break;
            const Complex next = r.value - e.value / e.slope;
            if (std::abs(evaluate(c, next).value) < std::abs(e.value)) {
                r.value = next;
            } else {
                break;
            }
        }
    }
}

// Real coefficients: snap near-real roots onto the axis and make complex
// roots exact conjugate pairs.
void enforce_conjugate_symmetry(std::vector<Root>& roots) {
    constexpr double kRealTol = 1e-10;
    std::vector<bool> used(roots.size(), false);
    for (std::size_t i = 0; i < roots.size(); ++i) {
        if (std::abs(roots[i].value.imag()) <= kRealTol * std::abs(roots[i].value)) {
            roots[i].value = Complex(roots[i].value.real(), 0.0);
            used[i] = true;
        }
    }
    for (std::size_t i = 0; i < roots.size(); ++i) {
        if (used[i] || roots[i].value.imag() <= 0.0) continue;
        std::size_t best = roots.size();
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < roots.size(); ++j) {
            if (used[j] || j == i || roots[j].value.imag() >= 0.0 ||
                roots[j].multiplicity != roots[i].multiplicity) {
                continue;
            }
            const double d = std::abs(roots[j].value - std::conj(roots[i].value));
            if (d < best_d) {
                best_d = d;
                best = j;
            }
        }
        if (best == roots.size()) continue;
        const Complex avg = 0.5 * (roots[i].value + std::conj(roots[best].value));
        roots[i].value = avg;
        roots[best].value = std::conj(avg);
        used[i] = used[best] = true;
    }
}

}  // namespace

std::vector<Root> find_poles(const Polynomial& den, const RootOptions& options) {
    if (den.degree() < 1) {
        throw Error(ErrorKind::InvalidArgument, "find_poles requires degree >= 1");
    }
    std::vector<double> c(den.coeffs().begin(), den.coeffs().end());
    std::vector<Root> roots;
    int zeros = 0;
    while (c.size() > 1 && c.front() == 0.0) {
        c.erase(c.begin());
        ++zeros;
    }
    if (zeros > 0) roots.push_back({Complex(0.0), zeros});

    const int m = static_cast<int>(c.size()) - 1;
    if (m >= 1) {
        // Balance: s = omega * x puts the geometric mean of root magnitudes at 1.
        const double omega = std::pow(std::abs(c.front() / c.back()), 1.0 / m);
        std::vector<double> scaled(c.size());
        double pw = 1.0;
        for (std::size_t k = 0; k < c.size(); ++k) {
            scaled[k] = c[k] * pw;
            pw *= omega;
        }
        const double lead = scaled.back();
        for (double& x : scaled) x /= lead;

        std::vector<Complex> z = initial_guesses(scaled);
        if (!aberth(scaled, z, options.max_iterations)) {
            if (!companion_roots(scaled, z)) {
                throw Error(ErrorKind::NonConvergence,
                            "root finding failed for degree " + std::to_string(m));
            }
        }
        std::vector<Root> found = cluster(scaled, z, options.cluster_tol);
        polish_simple(scaled, found);
        for (Root& r : found) {
            r.value *= omega;
            roots.push_back(r);
        }
    }
    enforce_conjugate_symmetry(roots);
    std::sort(roots.begin(), roots.end(), [](const Root& a, const Root& b) {
        if (a.value.real() != b.value.real()) return a.value.real() > b.value.real();
        return a.value.imag() > b.value.imag();
    });
    return roots;
}

}  // namespace rcmodal
