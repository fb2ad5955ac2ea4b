#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ballspec/errors.hpp"
#include "ballspec/quadrature.hpp"
#include "ballspec/radial.hpp"

namespace ballspec {

inline constexpr int kMaxBandLimit = 20;
inline constexpr int kDefaultQuadNodes = 128;

// Closed form of the weighted integral int_{x0}^{x1} exp(a r) r^2 dr.  A power
// series takes over near a = 0 where the antiderivative cancels catastrophically.
inline double exp_r2_integral(double a, double x0, double x1) {
    if (std::abs(a) < 0.5) {
        double sum = 0.0, term = 1.0;  // a^k / k!
        for (int k = 0; k < 40; ++k) {
            double piece = term * (std::pow(x1, k + 3) - std::pow(x0, k + 3)) / (k + 3);
            sum += piece;
            if (std::abs(piece) < 1e-18 * std::abs(sum) && k > 4) break;
            term *= a / (k + 1);
        }
        return sum;
    }
    auto antiderivative = [a](double x) {
        return std::exp(a * x) * (x * x / a - 2.0 * x / (a * a) + 2.0 / (a * a * a));
    };
    return antiderivative(x1) - antiderivative(x0);
}

// int_0^1 exp(a r) r^2 dr
inline double exp_weighted_integral(double a) { return exp_r2_integral(a, 0.0, 1.0); }

// Weighted inner product <p, q> = int_0^1 p(r) q(r) r^2 dr evaluated with a
// Gauss-Legendre rule on [0, 1].
inline double radial_inner_product(const RadialPolynomial& p, const RadialPolynomial& q,
                                   int quad_nodes = kDefaultQuadNodes) {
    const QuadRule& rule = gauss_legendre_01(quad_nodes);
    double sum = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        double r = rule.nodes[i];
        sum += rule.weights[i] * r * r * p.eval(r) * q.eval(r);
    }
    if (!std::isfinite(sum)) throw numerical_error("radial inner product is not finite");
    return sum;
}

// Same inner product through exact primitive integrals: 1/(i+j+3) for monomial
// pairs, the closed-form exponential integral otherwise.  Serves as an
// independent route against the quadrature values.
inline double analytic_inner_product(const RadialPolynomial& p, const RadialPolynomial& q) {
    if (p.mode != q.mode) throw std::domain_error("analytic inner product requires matching modes");
    double sum = 0.0;
    for (std::size_t i = 0; i < p.coeffs.size(); ++i) {
        if (p.coeffs[i] == 0.0) continue;
        for (std::size_t j = 0; j < q.coeffs.size(); ++j) {
            if (q.coeffs[j] == 0.0) continue;
            double primitive = (p.mode == Mode::TruncatedSum)
                                   ? 1.0 / static_cast<double>(i + j + 3)
                                   : exp_weighted_integral(static_cast<double>(i + j));
            sum += p.coeffs[i] * q.coeffs[j] * primitive;
        }
    }
    return sum;
}

// Projection coefficients consumed when an element is orthogonalized against
// its predecessors, stored over the full rectangle 0 <= l <= n <= n_max,
// 0 <= m <= k <= n-1.  The analytic construction populates only the m = l
// slots; the remaining slots exist so a learned variant can occupy them.
class MixingCoefficients {
public:
    explicit MixingCoefficients(int n_max) : n_max_(n_max) {
        if (n_max < 0 || n_max > kMaxBandLimit)
            throw std::domain_error("mixing table band limit out of range");
        base_.resize(n_max + 2, 0);
        for (int n = 0; n <= n_max; ++n)
            base_[n + 1] = base_[n] + static_cast<std::size_t>(n + 1) * pair_count(n);
        values_.assign(base_[n_max + 1], 0.0);
    }

    int n_max() const { return n_max_; }
    std::size_t size() const { return values_.size(); }
    std::vector<double>& data() { return values_; }
    const std::vector<double>& data() const { return values_; }

    static bool slot_valid(int n_max, int n, int l, int k, int m) {
        return n >= 0 && n <= n_max && l >= 0 && l <= n && k >= 0 && k <= n - 1 && m >= 0 &&
               m <= k;
    }

    double get(int n, int l, int k, int m) const { return values_[index(n, l, k, m)]; }
    double& at(int n, int l, int k, int m) { return values_[index(n, l, k, m)]; }

    std::size_t index(int n, int l, int k, int m) const {
        if (!slot_valid(n_max_, n, l, k, m))
            throw std::domain_error("mixing index (" + std::to_string(n) + "," +
                                    std::to_string(l) + "," + std::to_string(k) + "," +
                                    std::to_string(m) + ") outside table");
        return base_[n] + static_cast<std::size_t>(l) * pair_count(n) +
               static_cast<std::size_t>(k) * (k + 1) / 2 + m;
    }

private:
    static std::size_t pair_count(int n) { return static_cast<std::size_t>(n) * (n + 1) / 2; }

    int n_max_ = 0;
    std::vector<double> values_;
    std::vector<std::size_t> base_;
};

namespace detail {

inline void axpy(double alpha, const std::vector<double>& x, std::vector<double>& y) {
    if (y.size() < x.size()) y.resize(x.size(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

struct ChainResult {
    std::vector<RadialPolynomial> q;
    std::vector<double> norms2;
    // coeffs[i][j]: projection of generator i onto orthogonalized element j < i.
    std::vector<std::vector<double>> coeffs;
};

// Modified Gram-Schmidt with one reorthogonalization pass over a chain of
// generators sharing a common inner product.  Labels identify generators in
// degeneracy diagnostics.
inline ChainResult chain_gram_schmidt(const std::vector<RadialPolynomial>& generators,
                                      const std::vector<std::pair<int, int>>& labels,
                                      int quad_nodes) {
    ChainResult result;
    result.q.reserve(generators.size());
    result.norms2.reserve(generators.size());
    for (std::size_t i = 0; i < generators.size(); ++i) {
        RadialPolynomial v = generators[i];
        std::vector<double> proj(i, 0.0);
        double scale = radial_inner_product(generators[i], generators[i], quad_nodes);
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t j = 0; j < i; ++j) {
                double c = radial_inner_product(v, result.q[j], quad_nodes) / result.norms2[j];
                axpy(-c, result.q[j].coeffs, v.coeffs);
                proj[j] += c;
            }
        }
        double norm2 = radial_inner_product(v, v, quad_nodes);
        if (norm2 <= 1e-13 * std::max(1.0, scale)) {
            auto [n, l] = labels.at(i);
            throw degeneracy_error(n, l, norm2);
        }
        result.q.push_back(std::move(v));
        result.norms2.push_back(norm2);
        result.coeffs.push_back(std::move(proj));
    }
    return result;
}

}  // namespace detail

// Orthogonalized radial family over the unit ball, weight r^2.  Elements Q_nl
// are built per degree l by a Gram-Schmidt chain over n = max(l,1)..n_max, so
// orthogonality holds within each fixed l; paired with the spherical harmonic
// Y_lm this yields a fully orthogonal 3-D family Q_nl(r) Y_lm(theta, phi).
// Q_00 is identically zero because its generator vanishes.
struct BasisSet {
    int n_max = 0;
    Mode mode = Mode::TruncatedSum;
    int quad_nodes = kDefaultQuadNodes;
    std::vector<RadialPolynomial> radials;
    std::vector<double> norms2;
    MixingCoefficients mixing{0};
    std::vector<double> gram;  // (n, n_prime, l) dense, <f_nl, Q_{n_prime,l}>

    static std::size_t triangle_index(int n, int l) {
        return static_cast<std::size_t>(n) * (n + 1) / 2 + l;
    }

    void check_indices(int n, int l) const {
        detail::check_radial_indices(n, l);
        if (n > n_max) throw std::domain_error("radial index n exceeds band limit");
    }

    const RadialPolynomial& radial(int n, int l) const {
        check_indices(n, l);
        return radials[triangle_index(n, l)];
    }

    double norm2(int n, int l) const {
        check_indices(n, l);
        return norms2[triangle_index(n, l)];
    }

    int chain_start(int l) const { return std::max(l, 1); }

    // <f_nl, Q_{n_prime, l}>
    double gram_coeff(int n, int n_prime, int l) const {
        check_indices(n, l);
        check_indices(n_prime, l);
        std::size_t stride = static_cast<std::size_t>(n_max) + 1;
        return gram[(static_cast<std::size_t>(n) * stride + n_prime) * stride + l];
    }

    double& gram_slot(int n, int n_prime, int l) {
        std::size_t stride = static_cast<std::size_t>(n_max) + 1;
        return gram[(static_cast<std::size_t>(n) * stride + n_prime) * stride + l];
    }
};

inline BasisSet orthogonalize(int n_max, Mode mode, int quad_nodes = kDefaultQuadNodes) {
    if (n_max < 0 || n_max > kMaxBandLimit)
        throw std::domain_error("band limit out of range [0, " + std::to_string(kMaxBandLimit) +
                                "]");
    if (quad_nodes < 8 || quad_nodes > 4096)
        throw std::domain_error("quadrature node count out of range [8, 4096]");

    BasisSet basis;
    basis.n_max = n_max;
    basis.mode = mode;
    basis.quad_nodes = quad_nodes;
    std::size_t count = static_cast<std::size_t>(n_max + 1) * (n_max + 2) / 2;
    basis.radials.assign(count, RadialPolynomial{mode, {}});
    basis.norms2.assign(count, 0.0);
    basis.mixing = MixingCoefficients(n_max);
    std::size_t stride = static_cast<std::size_t>(n_max) + 1;
    basis.gram.assign(stride * stride * stride, 0.0);

    for (int l = 0; l <= n_max; ++l) {
        int start = basis.chain_start(l);
        if (start > n_max) continue;
        std::vector<RadialPolynomial> generators;
        std::vector<std::pair<int, int>> labels;
        for (int n = start; n <= n_max; ++n) {
            generators.push_back(base_radial(n, l, mode));
            labels.emplace_back(n, l);
        }
        detail::ChainResult chain = detail::chain_gram_schmidt(generators, labels, quad_nodes);
        for (int n = start; n <= n_max; ++n) {
            std::size_t i = static_cast<std::size_t>(n - start);
            std::size_t t = BasisSet::triangle_index(n, l);
            basis.radials[t] = chain.q[i];
            basis.norms2[t] = chain.norms2[i];
            for (std::size_t j = 0; j < i; ++j)
                basis.mixing.at(n, l, start + static_cast<int>(j), l) = chain.coeffs[i][j];
        }
        for (int n = start; n <= n_max; ++n) {
            RadialPolynomial f = base_radial(n, l, mode);
            for (int n_prime = start; n_prime <= n_max; ++n_prime) {
                std::size_t i = static_cast<std::size_t>(n_prime - start);
                basis.gram_slot(n, n_prime, l) = radial_inner_product(f, chain.q[i], quad_nodes);
            }
        }
    }
    return basis;
}

// Exact re-expansion of the shifted element Q_nl(r + shift) over the generator
// f_nl and the lower chain elements Q_kl.  Exponential primitives turn a shift
// into per-rate scale factors exp(j * shift), which keeps the re-expansion in
// the span of {f_nl} union {Q_kl : k < n} and makes it solvable rate by rate.
struct TranslatedRadial {
    int n = 0, l = 0;
    double r_shift = 0.0;
    double f_coeff = 1.0;
    std::vector<std::pair<int, double>> q_terms;

    double eval(const BasisSet& basis, double r) const {
        double sum = f_coeff * base_radial(n, l, basis.mode).eval(r);
        for (const auto& [k, w] : q_terms) sum += w * basis.radial(k, l).eval(r);
        return sum;
    }
};

inline TranslatedRadial translate_radial(const BasisSet& basis, int n, int l, double r_shift) {
    if (basis.mode != Mode::Exponential)
        throw input_error("translation requires the exponential mode");
    basis.check_indices(n, l);
    if (n == 0) throw input_error("cannot translate the identically-zero element (0, 0)");
    if (!(r_shift >= 0.0 && r_shift <= 1.0))
        throw std::domain_error("translation distance must lie in [0, 1]");

    TranslatedRadial out;
    out.n = n;
    out.l = l;
    out.r_shift = r_shift;
    out.f_coeff = std::exp((n - l) * r_shift);

    const RadialPolynomial& q = basis.radial(n, l);
    std::vector<double> remainder(q.coeffs.size(), 0.0);
    for (std::size_t d = 0; d < q.coeffs.size(); ++d)
        remainder[d] = q.coeffs[d] * std::exp(static_cast<double>(d) * r_shift);
    // The top rate n-l belongs entirely to f_nl and cancels exactly.
    remainder[n - l] = 0.0;

    int start = basis.chain_start(l);
    for (int k = n - 1; k >= start; --k) {
        const RadialPolynomial& qk = basis.radial(k, l);
        int top = k - l;
        double lead = qk.coeffs[top];
        double gamma = remainder[top] / lead;
        for (std::size_t d = 0; d < qk.coeffs.size(); ++d) remainder[d] -= gamma * qk.coeffs[d];
        if (gamma != 0.0) out.q_terms.emplace_back(k, gamma);
    }
    double leftover = 0.0;
    for (double v : remainder) leftover = std::max(leftover, std::abs(v));
    if (leftover > 1e-9 * std::max(1.0, std::abs(out.f_coeff)))
        throw numerical_error("translated expansion left an unresolved remainder of " +
                              std::to_string(leftover));
    return out;
}

}  // namespace ballspec
