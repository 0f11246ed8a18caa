#include "rcmodal/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "rcmodal/error.hpp"

namespace rcmodal {
namespace {

void check_pair(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error(ErrorKind::ShapeMismatch, "series lengths differ");
    if (a.empty()) throw Error(ErrorKind::InvalidArgument, "empty series");
}

}  // namespace

double r_squared(std::span<const double> predicted, std::span<const double> golden) {
    check_pair(predicted, golden);
    if (golden.size() < 2) throw Error(ErrorKind::InvalidArgument, "R^2 needs at least two points");
    double mean = 0.0;
    for (double g : golden) mean += g;
    mean /= static_cast<double>(golden.size());
    double ss_tot = 0.0;
    double ss_res = 0.0;
    for (std::size_t k = 0; k < golden.size(); ++k) {
        ss_tot += (golden[k] - mean) * (golden[k] - mean);
        ss_res += (predicted[k] - golden[k]) * (predicted[k] - golden[k]);
    }
    if (!(ss_tot > 0.0)) throw Error(ErrorKind::DegenerateGolden, "golden series is constant");
    return 1.0 - ss_res / ss_tot;
}

double mean_squared_error(std::span<const double> predicted, std::span<const double> golden) {
    check_pair(predicted, golden);
    double se = 0.0;
    for (std::size_t k = 0; k < golden.size(); ++k) se += (predicted[k] - golden[k]) * (predicted[k] - golden[k]);
    return se / static_cast<double>(golden.size());
}

double max_abs_error(std::span<const double> predicted, std::span<const double> golden) {
    check_pair(predicted, golden);
    double worst = 0.0;
    for (std::size_t k = 0; k < golden.size(); ++k) worst = std::max(worst, std::abs(predicted[k] - golden[k]));
    return worst;
}

double coverage_fraction(double states_per_pole, int order) {
    if (!(states_per_pole >= 1.0) || order < 1) {
        throw Error(ErrorKind::InvalidArgument, "coverage fraction needs N >= 1 and m >= 1");
    }
    const double m = order;
    return std::exp(std::log(states_per_pole) + std::log(m) - m * std::log(states_per_pole));
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
    check_pair(x, y);
    if (x.size() < 2) throw Error(ErrorKind::InvalidArgument, "slope needs at least two points");
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (!(x[k] > 0.0) || !(y[k] > 0.0)) throw Error(ErrorKind::InvalidArgument, "log-log fit needs positive data");
        mx += std::log(x[k]);
        my += std::log(y[k]);
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(x.size());
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        sxy += (std::log(x[k]) - mx) * (std::log(y[k]) - my);
        sxx += (std::log(x[k]) - mx) * (std::log(x[k]) - mx);
    }
    if (!(sxx > 0.0)) throw Error(ErrorKind::InvalidArgument, "x values are all equal");
    return sxy / sxx;
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex_digest(std::string_view bytes) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
    return buf;
}

}  // namespace rcmodal
