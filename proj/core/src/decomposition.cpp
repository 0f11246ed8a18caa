#include "rcmodal/decomposition.hpp"

#include <cmath>

#include "rcmodal/error.hpp"

namespace rcmodal {
namespace {

using CPoly = std::vector<Complex>;  // ascending coefficients

// Divide by (x - p); returns the quotient and stores the remainder.
CPoly synthetic_divide(const CPoly& c, Complex p, Complex& remainder) {
    if (c.size() == 1) {
        remainder = c[0];
        return {Complex(0.0)};
    }
    CPoly q(c.size() - 1);
    Complex acc(0.0);
    for (std::size_t k = c.size(); k-- > 1;) {
        acc = acc * p + c[k];
        q[k - 1] = acc;
    }
    remainder = acc * p + c[0];
    return q;
}

// First `count` Taylor coefficients of c about p.
CPoly taylor_about(CPoly c, Complex p, int count) {
    CPoly out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        Complex rem;
        c = synthetic_divide(c, p, rem);
        out.push_back(rem);
    }
    return out;
}

double balance_scale(const std::vector<Root>& roots) {
    double log_sum = 0.0;
    int count = 0;
    for (const Root& r : roots) {
        const double a = std::abs(r.value);
        if (a > 0.0) {
            log_sum += r.multiplicity * std::log(a);
            count += r.multiplicity;
        }
    }
    return count > 0 ? std::exp(log_sum / count) : 1.0;
}

CPoly scaled_coeffs(const Polynomial& p, double omega, double divisor) {
    CPoly out(p.coeffs().size());
    double pw = 1.0;
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] = Complex(p.coeffs()[k] * pw / divisor);
        pw *= omega;
    }
    return out;
}

using LComplex = std::complex<long double>;
using LPoly = std::vector<LComplex>;

LPoly scaled_coeffs_long(const Polynomial& p, long double omega, long double divisor) {
    LPoly out(p.coeffs().size());
    long double pw = 1.0L;
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] = LComplex(static_cast<long double>(p.coeffs()[k]) * pw / divisor);
        pw *= omega;
    }
    return out;
}

// Value and first derivative by Horner.
std::pair<LComplex, LComplex> eval_long(const LPoly& c, LComplex x) {
    LComplex v(0.0L);
    LComplex d(0.0L);
    for (auto it = c.rbegin(); it != c.rend(); ++it) {
        d = d * x + v;
        v = v * x + *it;
    }
    return {v, d};
}

// Simple pole and its residue in extended precision: the double-precision
// root is Newton-polished on the exactly scaled denominator, then
// r = N(p) / D'(p). Clustered poles make both steps ill-conditioned, and the
// extra 11 bits keep the result at the accuracy of the input coefficients.
std::pair<Complex, Complex> simple_mode_long(const LPoly& num, const LPoly& den, Complex p0) {
    LComplex p(p0.real(), p0.imag());
    auto [v, d] = eval_long(den, p);
    for (int it = 0; it < 4 && d != LComplex(0.0L); ++it) {
        const LComplex next = p - v / d;
        const auto [nv, nd] = eval_long(den, next);
        if (!(std::abs(nv) < std::abs(v))) break;
        p = next;
        v = nv;
        d = nd;
    }
    if (p0.imag() == 0.0) p = LComplex(p.real(), 0.0L);
    const LComplex r = eval_long(num, p).first / eval_long(den, p).second;
    return {Complex(static_cast<double>(p.real()), static_cast<double>(p.imag())),
            Complex(static_cast<double>(r.real()), static_cast<double>(r.imag()))};
}

// Step response of residue/(s - pole)^power, i.e. the integral from 0 to t of
// residue * tau^(power-1) e^(pole tau) / (power-1)!.
Complex step_term(const Mode& mode, double t) {
    const int j = mode.power;
    if (mode.pole == Complex(0.0)) {
        double f = 1.0;
        for (int m = 1; m <= j; ++m) f *= t / m;
        return mode.residue * f;
    }
    const Complex a = -mode.pole;
    const Complex x = a * t;
    Complex tail;
    if (j == 1 && mode.pole.imag() == 0.0) {
        tail = Complex(-std::expm1(-x.real()));
    } else {
        Complex partial(0.0);
        Complex term(1.0);
        for (int m = 0; m < j; ++m) {
            partial += term;
            term *= x / static_cast<double>(m + 1);
        }
        tail = 1.0 - std::exp(-x) * partial;
    }
    return mode.residue * tail / std::pow(a, j);
}

void check_times(std::span<const double> times) {
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (times[k] < 0.0 || (k > 0 && !(times[k] > times[k - 1]))) {
            throw Error(ErrorKind::InvalidArgument, "times must be nonnegative and strictly increasing");
        }
    }
}

}  // namespace

Complex ModalDecomposition::operator()(Complex s) const noexcept {
    Complex acc(0.0);
    for (const Mode& m : modes) acc += m.residue / std::pow(s - m.pole, m.power);
    return acc;
}

bool ModalDecomposition::all_simple() const noexcept {
    for (const Mode& m : modes) {
        if (m.power != 1) return false;
    }
    return true;
}

bool ModalDecomposition::all_real() const noexcept {
    for (const Mode& m : modes) {
        if (m.pole.imag() != 0.0) return false;
    }
    return true;
}

ModalDecomposition decompose(const TransferFunction& h, const RootOptions& options) {
    const std::vector<Root> roots = find_poles(h.den(), options);
    const double omega = balance_scale(roots);
    const int m = h.order();
    const double lead = h.den().leading() * std::pow(omega, m);
    const CPoly den = scaled_coeffs(h.den(), omega, lead);
    const CPoly num = scaled_coeffs(h.num(), omega, lead);
    const long double lead_long = static_cast<long double>(h.den().leading()) * std::pow(static_cast<long double>(omega), m);
    const LPoly den_long = scaled_coeffs_long(h.den(), omega, lead_long);
    const LPoly num_long = scaled_coeffs_long(h.num(), omega, lead_long);

    ModalDecomposition out;
    out.source_order = m;
    for (const Root& root : roots) {
        const Complex p = root.value / omega;
        const int k = root.multiplicity;
        if (k == 1) {
            const auto [pole, r] = simple_mode_long(num_long, den_long, p);
            out.modes.push_back({pole * omega, r * omega, 1});
            continue;
        }
        CPoly q = den;
        for (int i = 0; i < k; ++i) {
            Complex rem;
            q = synthetic_divide(q, p, rem);
        }
        const CPoly a = taylor_about(num, p, k);
        const CPoly b = taylor_about(q, p, k);
        CPoly c(static_cast<std::size_t>(k));
        for (int i = 0; i < k; ++i) {
            Complex acc = a[static_cast<std::size_t>(i)];
            for (int l = 1; l <= i; ++l) {
                acc -= b[static_cast<std::size_t>(l)] * c[static_cast<std::size_t>(i - l)];
            }
            c[static_cast<std::size_t>(i)] = acc / b[0];
        }
        for (int j = 1; j <= k; ++j) {
            const Complex r = c[static_cast<std::size_t>(k - j)] * std::pow(omega, j);
            out.modes.push_back({root.value, r, j});
        }
    }
    return out;
}

std::vector<GainMode> to_gain_form(const ModalDecomposition& d) {
    std::vector<GainMode> out;
    out.reserve(d.modes.size());
    for (const Mode& m : d.modes) {
        if (m.power != 1) {
            throw Error(ErrorKind::RepeatedPoleUnsupported, "gain form needs simple poles");
        }
        if (m.pole.imag() != 0.0 || std::abs(m.residue.imag()) > 1e-12 * std::abs(m.residue)) {
            throw Error(ErrorKind::ComplexPoleUnsupported, "gain form needs real poles and residues");
        }
        if (!(m.pole.real() < 0.0)) {
            throw Error(ErrorKind::InvalidArgument, "gain form needs strictly negative poles");
        }
        const double rate = -m.pole.real();
        out.push_back({rate, m.residue.real() / rate});
    }
    return out;
}

Waveform analytic_step_response(const ModalDecomposition& d, std::span<const double> times, double amplitude) {
    check_times(times);
    Waveform w;
    w.times.assign(times.begin(), times.end());
    w.values.resize(times.size());
    for (std::size_t k = 0; k < times.size(); ++k) {
        Complex acc(0.0);
        for (const Mode& m : d.modes) acc += step_term(m, times[k]);
        w.values[k] = amplitude * acc.real();
    }
    return w;
}

Waveform analytic_step_response(std::span<const GainMode> modes, std::span<const double> times, double amplitude) {
    check_times(times);
    Waveform w;
    w.times.assign(times.begin(), times.end());
    w.values.resize(times.size());
    for (std::size_t k = 0; k < times.size(); ++k) {
        double acc = 0.0;
        for (const GainMode& m : modes) acc -= m.gain * std::expm1(-m.rate * times[k]);
        w.values[k] = amplitude * acc;
    }
    return w;
}

}  // namespace rcmodal
