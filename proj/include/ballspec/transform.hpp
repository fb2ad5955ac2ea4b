#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "ballspec/basis.hpp"
#include "ballspec/errors.hpp"
#include "ballspec/grid.hpp"
#include "ballspec/harmonics.hpp"

namespace ballspec {

// Spectral coefficients of a field over the ball, indexed by radial order n,
// degree l <= n and order |m| <= l.  The (0, 0) slot pairs with the vanishing
// radial element and stays zero.
struct Moments {
    int n_max = 0;
    std::vector<std::complex<double>> values;

    Moments() = default;
    explicit Moments(int n_max) : n_max(n_max) {
        if (n_max < 0 || n_max > kMaxBandLimit)
            throw std::domain_error("moment band limit out of range");
        values.assign(block_base(n_max + 1), {0.0, 0.0});
    }

    static std::size_t block_base(int n) {
        // sum of (nu + 1)^2 for nu < n
        std::size_t s = static_cast<std::size_t>(n);
        return s * (s + 1) * (2 * s + 1) / 6;
    }

    std::size_t index(int n, int l, int m) const {
        if (n < 0 || n > n_max || l < 0 || l > n || m < -l || m > l)
            throw std::domain_error("moment index out of range");
        return block_base(n) + static_cast<std::size_t>(l) * l + l + m;
    }

    std::complex<double>& at(int n, int l, int m) { return values[index(n, l, m)]; }
    const std::complex<double>& at(int n, int l, int m) const { return values[index(n, l, m)]; }

    std::size_t size() const { return values.size(); }

    // Largest coefficient magnitude at orders m != 0.
    double max_nonzonal() const {
        double worst = 0.0;
        for (int n = 0; n <= n_max; ++n)
            for (int l = 0; l <= n; ++l)
                for (int m = -l; m <= l; ++m)
                    if (m != 0) worst = std::max(worst, std::abs(at(n, l, m)));
        return worst;
    }
};

// Everything about a lattice geometry that analysis and synthesis reuse:
// harmonic values at the angular cell centers, primitive radial profiles at
// the shell centers, and the midpoint cell measures.
struct SpectralTables {
    int n_max = 0;
    Mode mode = Mode::TruncatedSum;
    int n_r = 0, n_theta = 0, n_phi = 0;
    std::size_t n_lm = 0;                       // (n_max + 1)^2
    std::vector<std::complex<double>> y;        // [lm][j * n_phi + k]
    std::vector<double> prim;                   // [d][i], d = 0..n_max
    std::vector<double> w_ang;                  // [k] sin(phi_k) dtheta dphi
    std::vector<double> w_rad;                  // [i] r_i^2 dr

    static std::size_t lm_index(int l, int m) {
        return static_cast<std::size_t>(l) * l + l + m;
    }

    const std::complex<double>& y_at(int l, int m, int j, int k) const {
        return y[lm_index(l, m) * (static_cast<std::size_t>(n_theta) * n_phi) +
                 static_cast<std::size_t>(j) * n_phi + k];
    }
};

inline SpectralTables make_tables(const BasisSet& basis, const BallGrid& shape) {
    SpectralTables t;
    t.n_max = basis.n_max;
    t.mode = basis.mode;
    t.n_r = shape.n_r;
    t.n_theta = shape.n_theta;
    t.n_phi = shape.n_phi;
    t.n_lm = static_cast<std::size_t>(basis.n_max + 1) * (basis.n_max + 1);
    std::size_t n_ang = static_cast<std::size_t>(shape.n_theta) * shape.n_phi;
    t.y.resize(t.n_lm * n_ang);
    for (int l = 0; l <= basis.n_max; ++l)
        for (int m = -l; m <= l; ++m) {
            std::size_t row = SpectralTables::lm_index(l, m) * n_ang;
            for (int j = 0; j < shape.n_theta; ++j)
                for (int k = 0; k < shape.n_phi; ++k)
                    t.y[row + static_cast<std::size_t>(j) * shape.n_phi + k] =
                        sph_harm(l, m, shape.theta_center(j), shape.phi_center(k));
        }
    t.prim.resize(static_cast<std::size_t>(basis.n_max + 1) * shape.n_r);
    for (int d = 0; d <= basis.n_max; ++d)
        for (int i = 0; i < shape.n_r; ++i) {
            double r = shape.r_center(i);
            t.prim[static_cast<std::size_t>(d) * shape.n_r + i] =
                (basis.mode == Mode::TruncatedSum) ? std::pow(r, d) : std::exp(d * r);
        }
    t.w_ang.resize(shape.n_phi);
    for (int k = 0; k < shape.n_phi; ++k)
        t.w_ang[k] = std::sin(shape.phi_center(k)) * shape.delta_theta() * shape.delta_phi();
    t.w_rad.resize(shape.n_r);
    for (int i = 0; i < shape.n_r; ++i)
        t.w_rad[i] = shape.r_center(i) * shape.r_center(i) * shape.delta_r();
    return t;
}

// Per-shell angular analysis A[lm][i] = sum_{j,k} v(i,j,k) conj(Y_lm) w_ang(k).
inline std::vector<std::complex<double>> angular_analysis(const BallGrid& grid,
                                                          const SpectralTables& t) {
    if (grid.n_r != t.n_r || grid.n_theta != t.n_theta || grid.n_phi != t.n_phi)
        throw std::domain_error("grid shape does not match the tables");
    std::size_t n_ang = static_cast<std::size_t>(t.n_theta) * t.n_phi;
    std::vector<std::complex<double>> a(t.n_lm * t.n_r, {0.0, 0.0});
    for (std::size_t lm = 0; lm < t.n_lm; ++lm) {
        const std::complex<double>* yrow = &t.y[lm * n_ang];
        for (int i = 0; i < t.n_r; ++i) {
            std::complex<double> sum = 0.0;
            const double* v = &grid.values[static_cast<std::size_t>(i) * n_ang];
            for (int j = 0; j < t.n_theta; ++j)
                for (int k = 0; k < t.n_phi; ++k)
                    sum += v[static_cast<std::size_t>(j) * t.n_phi + k] *
                           std::conj(yrow[static_cast<std::size_t>(j) * t.n_phi + k]) *
                           t.w_ang[k];
            a[lm * t.n_r + i] = sum;
        }
    }
    return a;
}

// Moments of the primitive radial profiles: M[d][lm] = sum_i prim_d(r_i)
// w_rad(i) A[lm][i].  Every spectral analysis of a lattice factors through
// this table, and it is the fixed linear map a learned mixing differentiates
// through.
inline std::vector<std::complex<double>> primitive_moments(const BallGrid& grid,
                                                           const SpectralTables& t) {
    std::vector<std::complex<double>> a = angular_analysis(grid, t);
    std::vector<std::complex<double>> m(static_cast<std::size_t>(t.n_max + 1) * t.n_lm);
    for (int d = 0; d <= t.n_max; ++d) {
        const double* prow = &t.prim[static_cast<std::size_t>(d) * t.n_r];
        for (std::size_t lm = 0; lm < t.n_lm; ++lm) {
            std::complex<double> sum = 0.0;
            for (int i = 0; i < t.n_r; ++i) sum += prow[i] * t.w_rad[i] * a[lm * t.n_r + i];
            m[static_cast<std::size_t>(d) * t.n_lm + lm] = sum;
        }
    }
    return m;
}

// Radial coefficient vectors (over primitives 0..n_max) of the mixed family
// defined by a mixing table: q_nl = f_nl - sum_{k < n, mu <= k} W[n,l,k,mu]
// q_{k,mu}, walked in lexicographic order.  With the analytic table this
// reproduces the orthogonalized elements.
inline std::vector<std::vector<double>> mixed_radial_coeffs(const MixingCoefficients& w,
                                                            const BasisSet& basis) {
    if (w.n_max() != basis.n_max)
        throw std::domain_error("mixing table band limit does not match the basis");
    int n_max = basis.n_max;
    std::vector<std::vector<double>> q(
        static_cast<std::size_t>(n_max + 1) * (n_max + 2) / 2,
        std::vector<double>(static_cast<std::size_t>(n_max) + 1, 0.0));
    for (int n = 0; n <= n_max; ++n) {
        for (int l = 0; l <= n; ++l) {
            std::vector<double>& qnl = q[BasisSet::triangle_index(n, l)];
            RadialPolynomial f = base_radial(n, l, basis.mode);
            for (std::size_t d = 0; d < f.coeffs.size(); ++d) qnl[d] = f.coeffs[d];
            for (int k = 0; k < n; ++k)
                for (int mu = 0; mu <= k; ++mu) {
                    double c = w.get(n, l, k, mu);
                    if (c == 0.0) continue;
                    const std::vector<double>& qk = q[BasisSet::triangle_index(k, mu)];
                    for (std::size_t d = 0; d < qk.size(); ++d) qnl[d] -= c * qk[d];
                }
        }
    }
    return q;
}

// Contract per-(n, l) radial coefficient vectors with the primitive moments.
inline Moments contract_moments(const std::vector<std::vector<double>>& q,
                                const std::vector<std::complex<double>>& m,
                                const SpectralTables& t) {
    Moments out(t.n_max);
    for (int n = 0; n <= t.n_max; ++n)
        for (int l = 0; l <= n; ++l) {
            const std::vector<double>& qnl = q[BasisSet::triangle_index(n, l)];
            for (int mm = -l; mm <= l; ++mm) {
                std::size_t lm = SpectralTables::lm_index(l, mm);
                std::complex<double> sum = 0.0;
                for (int d = 0; d <= t.n_max; ++d)
                    if (qnl[d] != 0.0) sum += qnl[d] * m[static_cast<std::size_t>(d) * t.n_lm + lm];
                out.at(n, l, mm) = sum;
            }
        }
    return out;
}

// Spectral analysis against the orthogonalized family: Omega_nlm =
// <grid, Q_nl Y_lm> under the midpoint cell quadrature.
inline Moments forward_moments(const BallGrid& grid, const BasisSet& basis,
                               const SpectralTables& t) {
    std::vector<std::complex<double>> m = primitive_moments(grid, t);
    std::vector<std::vector<double>> q(
        static_cast<std::size_t>(basis.n_max + 1) * (basis.n_max + 2) / 2,
        std::vector<double>(static_cast<std::size_t>(basis.n_max) + 1, 0.0));
    for (int n = 0; n <= basis.n_max; ++n)
        for (int l = 0; l <= n; ++l) {
            const RadialPolynomial& p = basis.radial(n, l);
            std::vector<double>& qnl = q[BasisSet::triangle_index(n, l)];
            for (std::size_t d = 0; d < p.coeffs.size(); ++d) qnl[d] = p.coeffs[d];
        }
    return contract_moments(q, m, t);
}

inline Moments forward_moments(const BallGrid& grid, const BasisSet& basis) {
    return forward_moments(grid, basis, make_tables(basis, grid));
}

// Spectral analysis against the family generated by an arbitrary mixing table.
inline Moments latent_project(const BallGrid& grid, const BasisSet& basis,
                              const MixingCoefficients& w, const SpectralTables& t) {
    return contract_moments(mixed_radial_coeffs(w, basis), primitive_moments(grid, t), t);
}

inline Moments latent_project(const BallGrid& grid, const BasisSet& basis,
                              const MixingCoefficients& w) {
    return latent_project(grid, basis, w, make_tables(basis, grid));
}

// Convert analysis moments <f, Q Y> into synthesis coefficients by dividing
// out the squared radial norms, i.e. the weights that make sum a_nlm Q Y the
// orthogonal projection of f onto the family's span.
inline Moments synthesis_coeffs(const Moments& moments, const BasisSet& basis) {
    if (moments.n_max != basis.n_max)
        throw std::domain_error("moment band limit does not match the basis");
    Moments out = moments;
    for (int n = 0; n <= basis.n_max; ++n)
        for (int l = 0; l <= n; ++l) {
            double norm2 = basis.norm2(n, l);
            for (int m = -l; m <= l; ++m)
                out.at(n, l, m) = (norm2 > 0.0) ? moments.at(n, l, m) / norm2
                                                : std::complex<double>(0.0, 0.0);
        }
    return out;
}

// Projection synthesis sum_nlm Omega_nlm / |Q_nl|^2 Q_nl(r) Y_lm back onto a
// lattice.  With analysis moments this is the orthogonal projection onto the
// band-limited span, so enlarging the band limit can only improve the fit.
inline BallGrid reconstruct(const Moments& moments, const BasisSet& basis,
                            const BallGrid& shape, const SpectralTables& t) {
    if (moments.n_max != basis.n_max)
        throw std::domain_error("moment band limit does not match the basis");
    BallGrid out(shape.n_r, shape.n_theta, shape.n_phi);
    // Radial synthesis per (l, m): B[lm][i] = sum_n Omega_nlm / |Q_nl|^2 Q_nl(r_i)
    std::vector<std::complex<double>> b(t.n_lm * t.n_r, {0.0, 0.0});
    for (int l = 0; l <= basis.n_max; ++l)
        for (int m = -l; m <= l; ++m) {
            std::size_t lm = SpectralTables::lm_index(l, m);
            for (int n = std::max(l, 1); n <= basis.n_max; ++n) {
                std::complex<double> w = moments.at(n, l, m) / basis.norm2(n, l);
                if (w == std::complex<double>(0.0, 0.0)) continue;
                const RadialPolynomial& p = basis.radial(n, l);
                for (int i = 0; i < t.n_r; ++i) {
                    double value = 0.0;
                    for (std::size_t d = 0; d < p.coeffs.size(); ++d)
                        value += p.coeffs[d] * t.prim[d * static_cast<std::size_t>(t.n_r) + i];
                    b[lm * t.n_r + i] += w * value;
                }
            }
        }
    std::size_t n_ang = static_cast<std::size_t>(t.n_theta) * t.n_phi;
    for (int i = 0; i < t.n_r; ++i)
        for (int j = 0; j < t.n_theta; ++j)
            for (int k = 0; k < t.n_phi; ++k) {
                std::complex<double> sum = 0.0;
                for (std::size_t lm = 0; lm < t.n_lm; ++lm)
                    sum += b[lm * t.n_r + i] *
                           t.y[lm * n_ang + static_cast<std::size_t>(j) * t.n_phi + k];
                out.at(i, j, k) = sum.real();
            }
    return out;
}

inline BallGrid reconstruct(const Moments& moments, const BasisSet& basis,
                            const BallGrid& shape) {
    return reconstruct(moments, basis, shape, make_tables(basis, shape));
}

}  // namespace ballspec
