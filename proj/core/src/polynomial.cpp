#include "rcmodal/polynomial.hpp"

#include <algorithm>
#include <cmath>

#include "rcmodal/error.hpp"

namespace rcmodal {

Polynomial::Polynomial(std::vector<double> coeffs) : coeffs_(std::move(coeffs)) {
    if (coeffs_.empty()) {
        coeffs_.push_back(0.0);
    }
    for (double c : coeffs_) {
        if (!std::isfinite(c)) {
            throw Error(ErrorKind::InvalidArgument, "polynomial coefficient is not finite");
        }
    }
    while (coeffs_.size() > 1 && coeffs_.back() == 0.0) {
        coeffs_.pop_back();
    }
}

Polynomial Polynomial::from_roots(std::span<const Complex> roots, double leading) {
    std::vector<Complex> acc{Complex(1.0)};
    for (const Complex& r : roots) {
        std::vector<Complex> next(acc.size() + 1, Complex(0.0));
        for (std::size_t k = 0; k < acc.size(); ++k) {
            next[k + 1] += acc[k];
            next[k] -= r * acc[k];
        }
        acc = std::move(next);
    }
    std::vector<double> out(acc.size());
    std::transform(acc.begin(), acc.end(), out.begin(),
                   [leading](Complex c) { return leading * c.real(); });
    return Polynomial(std::move(out));
}

Complex Polynomial::operator()(Complex s) const noexcept {
    Complex acc(0.0);
    for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) {
        acc = acc * s + *it;
    }
    return acc;
}

double Polynomial::operator()(double s) const noexcept {
    double acc = 0.0;
    for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) {
        acc = acc * s + *it;
    }
    return acc;
}

Polynomial Polynomial::derivative() const {
    if (coeffs_.size() == 1) {
        return Polynomial{0.0};
    }
    std::vector<double> d(coeffs_.size() - 1);
    for (std::size_t k = 1; k < coeffs_.size(); ++k) {
        d[k - 1] = static_cast<double>(k) * coeffs_[k];
    }
    return Polynomial(std::move(d));
}

Polynomial operator+(const Polynomial& a, const Polynomial& b) {
    std::vector<double> c(std::max(a.coeffs_.size(), b.coeffs_.size()), 0.0);
    for (std::size_t k = 0; k < c.size(); ++k) {
        c[k] = a[k] + b[k];
    }
    return Polynomial(std::move(c));
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    std::vector<double> c(a.coeffs_.size() + b.coeffs_.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.coeffs_.size(); ++i) {
        for (std::size_t j = 0; j < b.coeffs_.size(); ++j) {
            c[i + j] += a.coeffs_[i] * b.coeffs_[j];
        }
    }
    return Polynomial(std::move(c));
}

Polynomial operator*(double k, const Polynomial& p) {
    std::vector<double> c(p.coeffs_);
    for (double& x : c) x *= k;
    return Polynomial(std::move(c));
}

Complex poly_eval(const Polynomial& p, Complex s) noexcept { return p(s); }

Polynomial poly_derivative(const Polynomial& p) { return p.derivative(); }

TransferFunction::TransferFunction(Polynomial num, Polynomial den)
    : num_(std::move(num)), den_(std::move(den)) {
    if (den_.degree() < 1) {
        throw Error(ErrorKind::NotStrictlyProper, "denominator must have degree >= 1");
    }
    if (!num_.is_zero() && num_.degree() >= den_.degree()) {
        throw Error(ErrorKind::NotStrictlyProper,
                    "numerator degree " + std::to_string(num_.degree()) +
                        " is not below denominator degree " + std::to_string(den_.degree()));
    }
}

}  // namespace rcmodal
