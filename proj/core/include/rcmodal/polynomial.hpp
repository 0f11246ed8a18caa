#pragma once

#include <complex>
#include <span>
#include <vector>

namespace rcmodal {

using Complex = std::complex<double>;

/// Real polynomial c0 + c1 s + ... + cd s^d, coefficients ascending by degree.
///
/// Trailing zero coefficients are trimmed on construction so the leading
/// coefficient is nonzero; the zero polynomial is stored as {0}.
class Polynomial {
public:
    Polynomial() : coeffs_{0.0} {}
    explicit Polynomial(std::vector<double> coeffs);
    Polynomial(std::initializer_list<double> coeffs) : Polynomial(std::vector<double>(coeffs)) {}

    /// Monic-times-`leading` polynomial with the given roots. Complex roots are
    /// expected in conjugate pairs; any residual imaginary part is dropped.
    static Polynomial from_roots(std::span<const Complex> roots, double leading = 1.0);

    [[nodiscard]] std::span<const double> coeffs() const noexcept { return coeffs_; }
    [[nodiscard]] int degree() const noexcept { return static_cast<int>(coeffs_.size()) - 1; }
    [[nodiscard]] bool is_zero() const noexcept { return coeffs_.size() == 1 && coeffs_[0] == 0.0; }
    [[nodiscard]] double leading() const noexcept { return coeffs_.back(); }
    [[nodiscard]] double operator[](std::size_t k) const noexcept {
        return k < coeffs_.size() ? coeffs_[k] : 0.0;
    }

    [[nodiscard]] Complex operator()(Complex s) const noexcept;
    [[nodiscard]] double operator()(double s) const noexcept;

    [[nodiscard]] Polynomial derivative() const;

    friend Polynomial operator+(const Polynomial& a, const Polynomial& b);
    friend Polynomial operator*(const Polynomial& a, const Polynomial& b);
    friend Polynomial operator*(double k, const Polynomial& p);
    friend bool operator==(const Polynomial& a, const Polynomial& b) = default;

private:
    std::vector<double> coeffs_;
};

/// Horner evaluation.
[[nodiscard]] Complex poly_eval(const Polynomial& p, Complex s) noexcept;
[[nodiscard]] Polynomial poly_derivative(const Polynomial& p);

/// Strictly proper rational function num(s)/den(s).
class TransferFunction {
public:
    /// Throws NotStrictlyProper unless degree(num) < degree(den), or the
    /// numerator is identically zero.
    TransferFunction(Polynomial num, Polynomial den);

    [[nodiscard]] const Polynomial& num() const noexcept { return num_; }
    [[nodiscard]] const Polynomial& den() const noexcept { return den_; }
    [[nodiscard]] int order() const noexcept { return den_.degree(); }

    [[nodiscard]] Complex operator()(Complex s) const noexcept { return num_(s) / den_(s); }
    [[nodiscard]] double dc_gain() const noexcept { return num_[0] / den_[0]; }

private:
    Polynomial num_;
    Polynomial den_;
};

}  // namespace rcmodal
