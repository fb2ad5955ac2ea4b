#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ballspec {

// Family of radial profile functions the basis is generated from.
//   TruncatedSum: f_nl(r) = (-1)^l * n * sum_{k=0}^{n} ((n-l) r)^k / k!
//   Exponential:  f_nl(r) = (-1)^l * n * exp((n-l) r)
enum class Mode { TruncatedSum, Exponential };

inline std::string mode_name(Mode mode) {
    return mode == Mode::TruncatedSum ? "truncated-sum" : "exponential";
}

inline Mode parse_mode(const std::string& text) {
    if (text == "truncated-sum") return Mode::TruncatedSum;
    if (text == "exponential") return Mode::Exponential;
    throw std::domain_error("unknown mode: " + text);
}

// A finite combination of the mode's primitive functions: monomials r^j for
// TruncatedSum, exponentials exp(j r) for Exponential, j being the index into
// coeffs.  The empty combination is identically zero.
struct RadialPolynomial {
    Mode mode = Mode::TruncatedSum;
    std::vector<double> coeffs;

    double eval(double r) const {
        double sum = 0.0;
        if (mode == Mode::TruncatedSum) {
            double power = 1.0;
            for (double c : coeffs) {
                sum += c * power;
                power *= r;
            }
        } else {
            for (std::size_t j = 0; j < coeffs.size(); ++j)
                if (coeffs[j] != 0.0) sum += coeffs[j] * std::exp(static_cast<double>(j) * r);
        }
        return sum;
    }

    bool is_zero() const {
        for (double c : coeffs)
            if (c != 0.0) return false;
        return true;
    }
};

namespace detail {

inline void check_radial_indices(int n, int l) {
    if (n < 0) throw std::domain_error("radial index n must be non-negative");
    if (l < 0 || l > n) throw std::domain_error("radial index l must satisfy 0 <= l <= n");
}

}  // namespace detail

// Coefficients of the generating function f_nl over the mode's primitives.
// f_00 is identically zero in both modes (the leading factor n vanishes).
inline RadialPolynomial base_radial(int n, int l, Mode mode) {
    detail::check_radial_indices(n, l);
    RadialPolynomial p;
    p.mode = mode;
    if (n == 0) return p;
    double sign = (l % 2 == 0) ? 1.0 : -1.0;
    if (mode == Mode::TruncatedSum) {
        p.coeffs.resize(static_cast<std::size_t>(n) + 1, 0.0);
        double term = 1.0;  // ((n-l)^k / k!), with 0^0 = 1
        for (int k = 0; k <= n; ++k) {
            p.coeffs[k] = sign * n * term;
            term *= static_cast<double>(n - l) / (k + 1);
        }
    } else {
        p.coeffs.resize(static_cast<std::size_t>(n - l) + 1, 0.0);
        p.coeffs[n - l] = sign * n;
    }
    return p;
}

// Pointwise value of the generating function at radius r in [0, 1].
inline double base_function(int n, int l, double r, Mode mode) {
    detail::check_radial_indices(n, l);
    if (!(r >= 0.0 && r <= 1.0)) throw std::domain_error("radius must lie in [0, 1]");
    if (n == 0) return 0.0;
    double sign = (l % 2 == 0) ? 1.0 : -1.0;
    if (mode == Mode::Exponential) return sign * n * std::exp((n - l) * r);
    double sum = 0.0, term = 1.0;
    for (int k = 0; k <= n; ++k) {
        sum += term;
        term *= (n - l) * r / (k + 1);
    }
    return sign * n * sum;
}

}  // namespace ballspec
