#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <vector>

#include "ballspec/basis.hpp"
#include "ballspec/errors.hpp"
#include "ballspec/grid.hpp"
#include "ballspec/harmonics.hpp"
#include "ballspec/transform.hpp"

namespace ballspec {

// Running tally of multiplies, adds, and transcendental evaluations
// (exponentials and spherical-harmonic calls) in the reference convolution
// path.  Activated by a CountingScope; the production path is uninstrumented.
struct OpCounts {
    std::uint64_t multiplies = 0;
    std::uint64_t adds = 0;
    std::uint64_t transcendentals = 0;

    OpCounts& operator+=(const OpCounts& o) {
        multiplies += o.multiplies;
        adds += o.adds;
        transcendentals += o.transcendentals;
        return *this;
    }
    bool operator==(const OpCounts&) const = default;
};

namespace detail {

inline OpCounts& op_counter() {
    thread_local OpCounts counts;
    return counts;
}

inline bool& op_counting() {
    thread_local bool active = false;
    return active;
}

inline void tally(std::uint64_t mul, std::uint64_t add, std::uint64_t transcend) {
    if (op_counting()) {
        OpCounts& c = op_counter();
        c.multiplies += mul;
        c.adds += add;
        c.transcendentals += transcend;
    }
}

}  // namespace detail

class CountingScope {
public:
    CountingScope() {
        detail::op_counter() = OpCounts{};
        detail::op_counting() = true;
    }
    ~CountingScope() { detail::op_counting() = false; }
    CountingScope(const CountingScope&) = delete;
    CountingScope& operator=(const CountingScope&) = delete;
    OpCounts counts() const { return detail::op_counter(); }
};

inline double angular_constant(int l) {
    return std::sqrt(4.0 * std::numbers::pi / (2.0 * l + 1.0));
}

// A kernel entering a rotation-aware operation must be zonal: all of its
// angular content sits at order m = 0.
inline void require_zonal(const Moments& g) {
    double scale = 0.0;
    for (const auto& v : g.values) scale = std::max(scale, std::abs(v));
    double worst = g.max_nonzonal();
    if (worst > 1e-9 * std::max(scale, 1e-30)) throw zonality_error(worst);
}

namespace detail {

inline void check_conv_inputs(const Moments& f, const Moments& g, const BasisSet& basis) {
    if (f.n_max != basis.n_max || g.n_max != basis.n_max)
        throw std::domain_error("coefficient band limits do not match the basis");
    require_zonal(g);
}

}  // namespace detail

// Reference evaluation of the blended correlation field at one query point
// (shift distance r_shift, aim azimuth alpha, aim polar angle beta), written
// as the uncached triple sum and instrumented for operation counting:
//
//   F = Re sum_l sqrt(4 pi / (2l+1)) sum_m Y_lm(alpha, beta)
//         sum_{n != n'} <f_nl, Q_n'l> (e^{(n-l) r'} - e^{(n'-l) r'}) a_nlm b_n'l
//
// where a and b are synthesis coefficients of the field and the zonal kernel.
// The two-factor radial term is exact for chain-adjacent pairs and drops the
// diagonal; see the windowed reference below for the exact radial integrals.
inline double blended_conv_reference_at(const Moments& f, const Moments& g,
                                        const BasisSet& basis, double r_shift, double alpha,
                                        double beta) {
    detail::check_conv_inputs(f, g, basis);
    if (basis.mode != Mode::Exponential)
        throw input_error("blended convolution requires the exponential mode");
    std::complex<double> total = 0.0;
    for (int l = 0; l <= basis.n_max; ++l) {
        double cl = angular_constant(l);
        int start = basis.chain_start(l);
        if (start > basis.n_max) continue;
        for (int m = -l; m <= l; ++m) {
            std::complex<double> y = sph_harm(l, m, alpha, beta);
            detail::tally(0, 0, 1);
            std::complex<double> inner = 0.0;
            for (int n = start; n <= basis.n_max; ++n) {
                for (int n2 = start; n2 <= basis.n_max; ++n2) {
                    if (n2 == n) continue;
                    double e1 = std::exp((n - l) * r_shift);
                    double e2 = std::exp((n2 - l) * r_shift);
                    detail::tally(0, 0, 2);
                    double w = basis.gram_coeff(n, n2, l) * (e1 - e2) * g.at(n2, l, 0).real();
                    detail::tally(2, 1, 0);
                    inner += w * f.at(n, l, m);
                    detail::tally(2, 2, 0);
                }
            }
            total += cl * (y * inner);
            detail::tally(6, 4, 0);
        }
    }
    return total.real();
}

// Closed-form operation counts of the reference path above for one query
// point, scaled by the number of query points; depends on nothing but the
// band limit.
inline OpCounts conv_flop_count(int n_max, std::uint64_t n_points) {
    if (n_max < 0 || n_max > kMaxBandLimit)
        throw std::domain_error("band limit out of range");
    OpCounts per_point;
    for (int l = 0; l <= n_max; ++l) {
        int start = std::max(l, 1);
        if (start > n_max) continue;
        std::uint64_t chain = static_cast<std::uint64_t>(n_max - start + 1);
        std::uint64_t pairs = chain * chain - chain;
        std::uint64_t orders = static_cast<std::uint64_t>(2 * l + 1);
        per_point.multiplies += orders * (4 * pairs + 6);
        per_point.adds += orders * (3 * pairs + 4);
        per_point.transcendentals += orders * (2 * pairs + 1);
    }
    OpCounts total;
    total.multiplies = per_point.multiplies * n_points;
    total.adds = per_point.adds * n_points;
    total.transcendentals = per_point.transcendentals * n_points;
    return total;
}

// Cached evaluation of the blended correlation field over a query lattice
// whose axes are (shift distance, aim azimuth, aim polar angle).  Exponentials
// are shared per shell and harmonics per angular cell; values match the
// reference path to roundoff.
inline BallGrid blended_conv(const Moments& f, const Moments& g, const BasisSet& basis,
                             const BallGrid& shape, const SpectralTables& tables) {
    detail::check_conv_inputs(f, g, basis);
    if (basis.mode != Mode::Exponential)
        throw input_error("blended convolution requires the exponential mode");
    int n_max = basis.n_max;
    std::size_t n_lm = static_cast<std::size_t>(n_max + 1) * (n_max + 1);
    std::size_t n_ang = static_cast<std::size_t>(shape.n_theta) * shape.n_phi;
    // K[lm][shell] = sum_{n != n'} gram (e - e) a b
    std::vector<std::complex<double>> k(n_lm * shape.n_r, {0.0, 0.0});
    std::vector<double> exps(static_cast<std::size_t>(n_max) + 1);
    for (int i = 0; i < shape.n_r; ++i) {
        double r_shift = shape.r_center(i);
        for (int d = 0; d <= n_max; ++d) exps[d] = std::exp(d * r_shift);
        for (int l = 0; l <= n_max; ++l) {
            int start = basis.chain_start(l);
            for (int m = -l; m <= l; ++m) {
                std::complex<double> sum = 0.0;
                for (int n = start; n <= n_max; ++n) {
                    double pair_weight = 0.0;
                    for (int n2 = start; n2 <= n_max; ++n2) {
                        if (n2 == n) continue;
                        pair_weight += basis.gram_coeff(n, n2, l) *
                                       (exps[n - l] - exps[n2 - l]) * g.at(n2, l, 0).real();
                    }
                    sum += pair_weight * f.at(n, l, m);
                }
                k[SpectralTables::lm_index(l, m) * shape.n_r + i] = sum;
            }
        }
    }
    BallGrid out(shape.n_r, shape.n_theta, shape.n_phi);
    for (int i = 0; i < shape.n_r; ++i)
        for (int j = 0; j < shape.n_theta; ++j)
            for (int kk = 0; kk < shape.n_phi; ++kk) {
                std::complex<double> sum = 0.0;
                for (int l = 0; l <= n_max; ++l)
                    for (int m = -l; m <= l; ++m) {
                        std::size_t lm = SpectralTables::lm_index(l, m);
                        sum += angular_constant(l) * k[lm * shape.n_r + i] *
                               tables.y[lm * n_ang + static_cast<std::size_t>(j) * shape.n_phi +
                                        kk];
                    }
                out.at(i, j, kk) = sum.real();
            }
    return out;
}

inline BallGrid blended_conv(const Moments& f, const Moments& g, const BasisSet& basis,
                             const BallGrid& shape) {
    return blended_conv(f, g, basis, shape, make_tables(basis, shape));
}

// Pure rotation correlation <f, rotated g>: the same angular structure with
// the exact diagonal radial coupling |Q_nl|^2 and no shift dependence, so the
// field is constant along the first lattice axis.
inline BallGrid rotation_only_conv(const Moments& f, const Moments& g, const BasisSet& basis,
                                   const BallGrid& shape, const SpectralTables& tables) {
    detail::check_conv_inputs(f, g, basis);
    int n_max = basis.n_max;
    std::size_t n_lm = static_cast<std::size_t>(n_max + 1) * (n_max + 1);
    std::size_t n_ang = static_cast<std::size_t>(shape.n_theta) * shape.n_phi;
    std::vector<std::complex<double>> k(n_lm, {0.0, 0.0});
    for (int l = 0; l <= n_max; ++l) {
        int start = basis.chain_start(l);
        for (int m = -l; m <= l; ++m) {
            std::complex<double> sum = 0.0;
            for (int n = start; n <= n_max; ++n)
                sum += basis.norm2(n, l) * g.at(n, l, 0).real() * f.at(n, l, m);
            k[SpectralTables::lm_index(l, m)] = sum;
        }
    }
    BallGrid out(shape.n_r, shape.n_theta, shape.n_phi);
    for (int j = 0; j < shape.n_theta; ++j)
        for (int kk = 0; kk < shape.n_phi; ++kk) {
            std::complex<double> sum = 0.0;
            for (int l = 0; l <= n_max; ++l)
                for (int m = -l; m <= l; ++m) {
                    std::size_t lm = SpectralTables::lm_index(l, m);
                    sum += angular_constant(l) * k[lm] *
                           tables.y[lm * n_ang + static_cast<std::size_t>(j) * shape.n_phi + kk];
                }
            for (int i = 0; i < shape.n_r; ++i) out.at(i, j, kk) = sum.real();
        }
    return out;
}

inline BallGrid rotation_only_conv(const Moments& f, const Moments& g, const BasisSet& basis,
                                   const BallGrid& shape) {
    return rotation_only_conv(f, g, basis, shape, make_tables(basis, shape));
}

// Exact spectral evaluation of the truncated-support correlation: the radial
// factor is the true integral int_{r'}^1 Q_nl(r) Q_n'l(r - r') r^2 dr over all
// chain pairs including the diagonal.  This is what the two-factor form above
// approximates; it exists as a diagnostic reference, not as one of the
// production operations.
inline double windowed_conv_reference_at(const Moments& f, const Moments& g,
                                         const BasisSet& basis, double r_shift, double alpha,
                                         double beta) {
    detail::check_conv_inputs(f, g, basis);
    if (basis.mode != Mode::Exponential)
        throw input_error("windowed correlation requires the exponential mode");
    std::complex<double> total = 0.0;
    for (int l = 0; l <= basis.n_max; ++l) {
        int start = basis.chain_start(l);
        if (start > basis.n_max) continue;
        for (int m = -l; m <= l; ++m) {
            std::complex<double> y = sph_harm(l, m, alpha, beta);
            std::complex<double> inner = 0.0;
            for (int n = start; n <= basis.n_max; ++n)
                for (int n2 = start; n2 <= basis.n_max; ++n2) {
                    const RadialPolynomial& qa = basis.radial(n, l);
                    const RadialPolynomial& qb = basis.radial(n2, l);
                    double radial = 0.0;
                    for (std::size_t d = 0; d < qa.coeffs.size(); ++d) {
                        if (qa.coeffs[d] == 0.0) continue;
                        for (std::size_t d2 = 0; d2 < qb.coeffs.size(); ++d2) {
                            if (qb.coeffs[d2] == 0.0) continue;
                            radial += qa.coeffs[d] * qb.coeffs[d2] *
                                      std::exp(-static_cast<double>(d2) * r_shift) *
                                      exp_r2_integral(static_cast<double>(d + d2), r_shift, 1.0);
                        }
                    }
                    inner += radial * g.at(n2, l, 0).real() * f.at(n, l, m);
                }
            total += angular_constant(l) * (y * inner);
        }
    }
    return total.real();
}

namespace detail {

// Trilinear sample of a spherical lattice at an arbitrary interior point.
// Azimuth wraps, the polar axis clamps, radius clamps inside [0, 1] and
// returns 0 outside.
inline double sample_grid(const BallGrid& g, double r, double theta, double phi) {
    if (r < 0.0 || r > 1.0) return 0.0;
    double two_pi = 2.0 * std::numbers::pi;
    theta = std::fmod(theta, two_pi);
    if (theta < 0.0) theta += two_pi;

    double x_r = r * g.n_r - 0.5;
    double x_t = theta / two_pi * g.n_theta - 0.5;
    double x_p = phi / std::numbers::pi * g.n_phi - 0.5;

    int i0 = static_cast<int>(std::floor(x_r));
    int j0 = static_cast<int>(std::floor(x_t));
    int k0 = static_cast<int>(std::floor(x_p));
    double fr = x_r - i0, ft = x_t - j0, fp = x_p - k0;

    auto clamp_r = [&](int i) { return std::min(std::max(i, 0), g.n_r - 1); };
    auto wrap_t = [&](int j) { return ((j % g.n_theta) + g.n_theta) % g.n_theta; };
    auto clamp_p = [&](int k) { return std::min(std::max(k, 0), g.n_phi - 1); };

    double value = 0.0;
    for (int di = 0; di < 2; ++di)
        for (int dj = 0; dj < 2; ++dj)
            for (int dk = 0; dk < 2; ++dk) {
                double w = (di ? fr : 1.0 - fr) * (dj ? ft : 1.0 - ft) * (dk ? fp : 1.0 - fp);
                value += w * g.at(clamp_r(i0 + di), wrap_t(j0 + dj), clamp_p(k0 + dk));
            }
    return value;
}

}  // namespace detail

// Brute-force spatial correlation: integrate f against the kernel grid g
// carried by the roto-translation (rotate the polar axis to (alpha, beta),
// shift by r_shift along the radial coordinate), with the full volume measure.
inline double spatial_conv_oracle_at(const BallGrid& f, const BallGrid& g, double r_shift,
                                     double alpha, double beta) {
    double ca = std::cos(alpha), sa = std::sin(alpha);
    double cb = std::cos(beta), sb = std::sin(beta);
    double sum = 0.0;
    for (int i = 0; i < f.n_r; ++i) {
        double r = f.r_center(i);
        double rg = r - r_shift;
        if (rg < 0.0 || rg > 1.0) continue;
        for (int j = 0; j < f.n_theta; ++j) {
            double theta = f.theta_center(j);
            for (int k = 0; k < f.n_phi; ++k) {
                double phi = f.phi_center(k);
                double u0 = std::sin(phi) * std::cos(theta);
                double u1 = std::sin(phi) * std::sin(theta);
                double u2 = std::cos(phi);
                // Inverse rotation R_y(-beta) R_z(-alpha) of the direction.
                double v0 = ca * u0 + sa * u1;
                double v1 = -sa * u0 + ca * u1;
                double v2 = u2;
                double w0 = cb * v0 - sb * v2;
                double w1 = v1;
                double w2 = sb * v0 + cb * v2;
                double theta_g = std::atan2(w1, w0);
                double phi_g = std::acos(std::clamp(w2, -1.0, 1.0));
                double measure = r * r * std::sin(phi) * f.delta_r() * f.delta_theta() *
                                 f.delta_phi();
                sum += f.at(i, j, k) * detail::sample_grid(g, rg, theta_g, phi_g) * measure;
            }
        }
    }
    return sum;
}

inline BallGrid spatial_conv_oracle(const BallGrid& f, const BallGrid& g,
                                    const BallGrid& shape) {
    BallGrid out(shape.n_r, shape.n_theta, shape.n_phi);
    for (int i = 0; i < shape.n_r; ++i)
        for (int j = 0; j < shape.n_theta; ++j)
            for (int k = 0; k < shape.n_phi; ++k)
                out.at(i, j, k) = spatial_conv_oracle_at(f, g, shape.r_center(i),
                                                         shape.theta_center(j),
                                                         shape.phi_center(k));
    return out;
}

}  // namespace ballspec
