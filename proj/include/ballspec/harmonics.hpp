#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "ballspec/errors.hpp"

namespace ballspec {

inline constexpr int kMaxHarmonicDegree = 64;

namespace detail {

inline void check_harmonic_indices(int l, int m_abs) {
    if (l < 0 || l > kMaxHarmonicDegree)
        throw std::domain_error("harmonic degree out of range [0, 64]");
    if (m_abs > l) throw std::domain_error("harmonic order exceeds degree");
}

}  // namespace detail

// Associated Legendre function P_l^m(x) for 0 <= m <= l, Condon-Shortley sign
// included, by upward recurrence in l from the closed-form diagonal.
inline double assoc_legendre(int l, int m, double x) {
    if (m < 0) throw std::domain_error("assoc_legendre expects m >= 0");
    detail::check_harmonic_indices(l, m);
    if (!(x >= -1.0 && x <= 1.0)) throw std::domain_error("argument must lie in [-1, 1]");
    double pmm = 1.0;
    if (m > 0) {
        double s = std::sqrt((1.0 - x) * (1.0 + x));
        double factor = 1.0;
        for (int k = 1; k <= m; ++k) {
            pmm *= -factor * s;
            factor += 2.0;
        }
    }
    if (l == m) return pmm;
    double pmm1 = x * (2.0 * m + 1.0) * pmm;
    if (l == m + 1) return pmm1;
    double p = 0.0;
    for (int k = m + 2; k <= l; ++k) {
        p = (x * (2.0 * k - 1.0) * pmm1 - (k + m - 1.0) * pmm) / (k - m);
        pmm = pmm1;
        pmm1 = p;
    }
    return p;
}

// Orthonormal spherical harmonic Y_lm(theta, phi) with azimuth theta and polar
// angle phi, so Y_lm = N_lm P_l^m(cos phi) exp(i m theta).  Negative orders
// follow Y_{l,-m} = (-1)^m conj(Y_lm).
inline std::complex<double> sph_harm(int l, int m, double theta, double phi) {
    detail::check_harmonic_indices(l, std::abs(m));
    if (!std::isfinite(theta) || !std::isfinite(phi))
        throw std::domain_error("angles must be finite");
    int m_abs = std::abs(m);
    double log_ratio = std::lgamma(l - m_abs + 1.0) - std::lgamma(l + m_abs + 1.0);
    double norm = std::sqrt((2.0 * l + 1.0) / (4.0 * std::numbers::pi) * std::exp(log_ratio));
    double p = assoc_legendre(l, m_abs, std::cos(phi));
    std::complex<double> value =
        norm * p * std::complex<double>(std::cos(m_abs * theta), std::sin(m_abs * theta));
    if (m < 0 && (m_abs % 2 == 1)) value = -std::conj(value);
    else if (m < 0) value = std::conj(value);
    return value;
}

// Expansion coefficients of a unit-power zonal pattern re-aimed from the polar
// axis to the direction with azimuth alpha and polar angle beta: the rotated
// Y_l0 pattern equals sum_m c_m Y_lm with c_m = sqrt(4 pi / (2l+1))
// conj(Y_lm(alpha, beta)).  Returned indexed by m + l; sum of |c_m|^2 is 1.
inline std::vector<std::complex<double>> rotate_zonal(int l, double alpha, double beta) {
    detail::check_harmonic_indices(l, 0);
    if (!std::isfinite(alpha) || !std::isfinite(beta))
        throw std::domain_error("angles must be finite");
    std::vector<std::complex<double>> c(2 * l + 1);
    double scale = std::sqrt(4.0 * std::numbers::pi / (2.0 * l + 1.0));
    for (int m = -l; m <= l; ++m) c[m + l] = scale * std::conj(sph_harm(l, m, alpha, beta));
    return c;
}

// Legendre polynomial P_l(x), the m = 0 special case.
inline double legendre(int l, double x) { return assoc_legendre(l, 0, x); }

}  // namespace ballspec
