#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "ballspec/basis.hpp"
#include "ballspec/radial.hpp"
#include "support/rational.hpp"

using namespace ballspec;

TEST_CASE("generating function matches its closed-form values") {
    CHECK(base_function(1, 0, 0.5, Mode::TruncatedSum) == Catch::Approx(1.5).epsilon(1e-14));
    CHECK(base_function(1, 0, 0.5, Mode::Exponential) ==
          Catch::Approx(std::exp(0.5)).epsilon(1e-14));
    CHECK(base_function(1, 1, 0.5, Mode::TruncatedSum) == Catch::Approx(-1.0).epsilon(1e-14));
    CHECK(base_function(1, 1, 0.5, Mode::Exponential) == Catch::Approx(-1.0).epsilon(1e-14));
    for (double r : {0.0, 0.25, 1.0}) {
        CHECK(base_function(0, 0, r, Mode::TruncatedSum) == 0.0);
        CHECK(base_function(0, 0, r, Mode::Exponential) == 0.0);
    }
}

TEST_CASE("generator coefficients agree with pointwise evaluation") {
    for (Mode mode : {Mode::TruncatedSum, Mode::Exponential}) {
        for (int n = 0; n <= 5; ++n) {
            for (int l = 0; l <= n; ++l) {
                RadialPolynomial p = base_radial(n, l, mode);
                if (mode == Mode::TruncatedSum)
                    REQUIRE(p.coeffs.size() == static_cast<std::size_t>(n == 0 ? 0 : n + 1));
                for (double r : {0.0, 0.1, 0.5, 0.77, 1.0}) {
                    CHECK(p.eval(r) ==
                          Catch::Approx(base_function(n, l, r, mode)).margin(1e-12));
                }
            }
        }
    }
    CHECK(base_radial(0, 0, Mode::TruncatedSum).is_zero());
    CHECK(base_radial(0, 0, Mode::Exponential).is_zero());
}

TEST_CASE("generating function rejects out-of-contract arguments") {
    CHECK_THROWS_AS(base_function(-1, 0, 0.5, Mode::TruncatedSum), std::domain_error);
    CHECK_THROWS_AS(base_function(2, 3, 0.5, Mode::TruncatedSum), std::domain_error);
    CHECK_THROWS_AS(base_function(2, -1, 0.5, Mode::TruncatedSum), std::domain_error);
    CHECK_THROWS_AS(base_function(2, 1, 1.5, Mode::TruncatedSum), std::domain_error);
    CHECK_THROWS_AS(base_function(2, 1, -0.1, Mode::Exponential), std::domain_error);
    CHECK_THROWS_AS(base_function(2, 1, std::nan(""), Mode::Exponential), std::domain_error);
}

TEST_CASE("weighted inner product reproduces monomial integrals") {
    RadialPolynomial one{Mode::TruncatedSum, {1.0}};
    RadialPolynomial linear{Mode::TruncatedSum, {0.0, 1.0}};
    CHECK(radial_inner_product(one, one) == Catch::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(radial_inner_product(linear, linear) == Catch::Approx(1.0 / 5.0).epsilon(1e-14));
    CHECK(radial_inner_product(one, linear) == Catch::Approx(1.0 / 4.0).epsilon(1e-14));

    RadialPolynomial flat_exp{Mode::Exponential, {1.0}};
    CHECK(radial_inner_product(flat_exp, flat_exp) == Catch::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("quadrature and closed-form inner products agree on random elements") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    for (Mode mode : {Mode::TruncatedSum, Mode::Exponential}) {
        for (int trial = 0; trial < 20; ++trial) {
            RadialPolynomial p{mode, {dist(rng), dist(rng), dist(rng), dist(rng)}};
            RadialPolynomial q{mode, {dist(rng), dist(rng), dist(rng)}};
            double via_quad = radial_inner_product(p, q);
            double via_exact = analytic_inner_product(p, q);
            CHECK(via_quad == Catch::Approx(via_exact).margin(1e-12));
        }
    }
}

TEST_CASE("closed-form exponential integrals match quadrature") {
    CHECK(exp_weighted_integral(0.0) == Catch::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(exp_weighted_integral(1.0) == Catch::Approx(std::exp(1.0) - 2.0).epsilon(1e-13));
    CHECK(exp_weighted_integral(-1.0) ==
          Catch::Approx(2.0 - 5.0 / std::exp(1.0)).epsilon(1e-13));
    // Continuity across the series/antiderivative switchover.
    CHECK(exp_weighted_integral(0.4999) == Catch::Approx(exp_weighted_integral(0.5001))
                                               .epsilon(1e-3));

    const QuadRule& rule = gauss_legendre(64);
    for (double a : {2.0, 5.0, -3.0}) {
        for (auto [x0, x1] : {std::pair{0.3, 1.0}, std::pair{0.0, 0.7}}) {
            double reference = 0.0;
            for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
                double r = 0.5 * (x1 - x0) * rule.nodes[i] + 0.5 * (x1 + x0);
                reference += 0.5 * (x1 - x0) * rule.weights[i] * r * r * std::exp(a * r);
            }
            CHECK(exp_r2_integral(a, x0, x1) == Catch::Approx(reference).epsilon(1e-13));
        }
    }
}

TEST_CASE("polynomial-mode orthogonalization matches the exact-rational oracle") {
    const int n_max = 3;
    BasisSet basis = orthogonalize(n_max, Mode::TruncatedSum);
    for (int l = 0; l <= n_max; ++l) {
        oracle::ExactChain chain = oracle::exact_chain(l, n_max);
        int start = basis.chain_start(l);
        for (int n = start; n <= n_max; ++n) {
            std::size_t i = static_cast<std::size_t>(n - start);
            const RadialPolynomial& q = basis.radial(n, l);
            REQUIRE(q.coeffs.size() <= chain.q[i].size() + 1);
            double scale = 0.0;
            for (const auto& f : chain.q[i]) scale = std::max(scale, std::abs(f.value()));
            for (std::size_t d = 0; d < chain.q[i].size(); ++d) {
                double mine = d < q.coeffs.size() ? q.coeffs[d] : 0.0;
                CHECK(mine == Catch::Approx(chain.q[i][d].value()).margin(1e-12 * scale));
            }
            CHECK(basis.norm2(n, l) ==
                  Catch::Approx(chain.norms2[i].value()).epsilon(1e-11));
            for (std::size_t j = 0; j < i; ++j) {
                CHECK(basis.mixing.get(n, l, start + static_cast<int>(j), l) ==
                      Catch::Approx(chain.coeffs[i][j].value()).margin(1e-11));
            }
        }
    }
}

TEST_CASE("chains are orthogonal within each degree for both modes") {
    for (Mode mode : {Mode::TruncatedSum, Mode::Exponential}) {
        BasisSet basis = orthogonalize(5, mode);
        for (int l = 0; l <= 5; ++l) {
            for (int n = basis.chain_start(l); n <= 5; ++n) {
                for (int n2 = basis.chain_start(l); n2 < n; ++n2) {
                    double ip = radial_inner_product(basis.radial(n, l), basis.radial(n2, l));
                    double denom = std::sqrt(basis.norm2(n, l) * basis.norm2(n2, l));
                    CHECK(std::abs(ip) / denom < 1e-11);
                }
            }
        }
    }
}

TEST_CASE("norms are positive away from the vanishing generator") {
    BasisSet basis = orthogonalize(5, Mode::Exponential);
    CHECK(basis.radial(0, 0).is_zero());
    CHECK(basis.norm2(0, 0) == 0.0);
    for (int n = 1; n <= 5; ++n)
        for (int l = 0; l <= n; ++l) CHECK(basis.norm2(n, l) > 0.0);
}

TEST_CASE("stored projections and pair integrals form two consistent routes") {
    BasisSet basis = orthogonalize(5, Mode::Exponential);
    for (int l = 0; l <= 5; ++l) {
        int start = basis.chain_start(l);
        for (int n = start; n <= 5; ++n) {
            RadialPolynomial f = base_radial(n, l, Mode::Exponential);
            for (int k = start; k <= 5; ++k) {
                double via_exact = analytic_inner_product(f, basis.radial(k, l));
                double stored = basis.gram_coeff(n, k, l);
                CHECK(stored == Catch::Approx(via_exact).margin(1e-10 *
                                                                std::max(1.0, std::abs(via_exact))));
                if (k < n) {
                    double projection = stored / basis.norm2(k, l);
                    CHECK(basis.mixing.get(n, l, k, l) ==
                          Catch::Approx(projection).margin(1e-9 *
                                                           std::max(1.0, std::abs(projection))));
                }
            }
            // f_nl differs from Q_nl only by components along earlier elements;
            // cancellation in the pair integral scales with the generator norm.
            double f_scale = std::sqrt(std::max(1.0, analytic_inner_product(f, f)));
            CHECK(basis.gram_coeff(n, n, l) ==
                  Catch::Approx(basis.norm2(n, l)).margin(1e-11 * f_scale));
        }
    }
}

TEST_CASE("mixing table stays empty off the analytic slots") {
    BasisSet basis = orthogonalize(4, Mode::Exponential);
    for (int n = 0; n <= 4; ++n)
        for (int l = 0; l <= n; ++l)
            for (int k = 0; k < n; ++k)
                for (int m = 0; m <= k; ++m)
                    if (m != l) CHECK(basis.mixing.get(n, l, k, m) == 0.0);
}

TEST_CASE("mixing table validates slot indices") {
    MixingCoefficients table(3);
    CHECK_THROWS_AS(table.get(4, 0, 1, 0), std::domain_error);
    CHECK_THROWS_AS(table.get(2, 3, 1, 0), std::domain_error);
    CHECK_THROWS_AS(table.get(2, 0, 2, 0), std::domain_error);
    CHECK_THROWS_AS(table.get(2, 0, 1, 2), std::domain_error);
    CHECK(MixingCoefficients::slot_valid(3, 2, 0, 1, 1));
    CHECK_FALSE(MixingCoefficients::slot_valid(3, 0, 0, 0, 0));
}

TEST_CASE("orthogonalization is deterministic") {
    BasisSet a = orthogonalize(4, Mode::Exponential);
    BasisSet b = orthogonalize(4, Mode::Exponential);
    for (std::size_t i = 0; i < a.radials.size(); ++i) {
        REQUIRE(a.radials[i].coeffs == b.radials[i].coeffs);
    }
    REQUIRE(a.norms2 == b.norms2);
    REQUIRE(a.mixing.data() == b.mixing.data());
}

TEST_CASE("orthogonalization rejects out-of-range configuration") {
    CHECK_THROWS_AS(orthogonalize(-1, Mode::Exponential), std::domain_error);
    CHECK_THROWS_AS(orthogonalize(kMaxBandLimit + 1, Mode::Exponential), std::domain_error);
    CHECK_THROWS_AS(orthogonalize(3, Mode::Exponential, 4), std::domain_error);
    CHECK_THROWS_AS(orthogonalize(3, Mode::Exponential, 100000), std::domain_error);
}

TEST_CASE("a dependent chain raises a degeneracy error naming the element") {
    std::vector<RadialPolynomial> generators = {
        base_radial(2, 0, Mode::TruncatedSum),
        base_radial(2, 0, Mode::TruncatedSum),
    };
    std::vector<std::pair<int, int>> labels = {{2, 0}, {2, 0}};
    try {
        detail::chain_gram_schmidt(generators, labels, kDefaultQuadNodes);
        FAIL("expected a degeneracy error");
    } catch (const degeneracy_error& e) {
        CHECK(e.n == 2);
        CHECK(e.l == 0);
        CHECK(e.residual_norm2 < 1e-10);
    }
}

TEST_CASE("basis accessors reject indices outside the band limit") {
    BasisSet basis = orthogonalize(3, Mode::Exponential);
    CHECK_THROWS_AS(basis.radial(4, 0), std::domain_error);
    CHECK_THROWS_AS(basis.radial(2, 3), std::domain_error);
    CHECK_THROWS_AS(basis.norm2(-1, 0), std::domain_error);
}
