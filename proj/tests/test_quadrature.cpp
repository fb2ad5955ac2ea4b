#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "ballspec/quadrature.hpp"

using namespace ballspec;

TEST_CASE("gauss-legendre nodes are symmetric and weights sum to two") {
    for (int n : {3, 8, 64, 128}) {
        const QuadRule& rule = gauss_legendre(n);
        REQUIRE(rule.nodes.size() == static_cast<std::size_t>(n));
        double wsum = 0.0;
        for (int i = 0; i < n; ++i) {
            wsum += rule.weights[i];
            CHECK(rule.nodes[i] == Catch::Approx(-rule.nodes[n - 1 - i]).margin(1e-15));
            CHECK(rule.weights[i] > 0.0);
        }
        CHECK(wsum == Catch::Approx(2.0).epsilon(1e-14));
    }
}

TEST_CASE("gauss-legendre integrates polynomials of degree 2n-1 exactly") {
    const QuadRule& rule = gauss_legendre_01(8);
    double sum = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i)
        sum += rule.weights[i] * std::pow(rule.nodes[i], 10);
    CHECK(sum == Catch::Approx(1.0 / 11.0).epsilon(1e-14));

    const QuadRule& big = gauss_legendre_01(128);
    double exp_sum = 0.0;
    for (std::size_t i = 0; i < big.nodes.size(); ++i) {
        double r = big.nodes[i];
        exp_sum += big.weights[i] * r * r * std::exp(r);
    }
    CHECK(exp_sum == Catch::Approx(std::exp(1.0) - 2.0).epsilon(1e-14));
}

TEST_CASE("gauss-legendre results are cached and stable") {
    const QuadRule& a = gauss_legendre(128);
    const QuadRule& b = gauss_legendre(128);
    CHECK(&a == &b);
}

TEST_CASE("angular rule integrates over the sphere") {
    AngularRule rule = angular_rule(32, 16);
    double area = 0.0;
    double second_moment = 0.0;
    for (double phi_w : rule.phi_weights) (void)phi_w;
    for (std::size_t j = 0; j < rule.thetas.size(); ++j) {
        for (std::size_t k = 0; k < rule.phis.size(); ++k) {
            double w = rule.theta_weight * rule.phi_weights[k];
            area += w;
            double c = std::cos(rule.phis[k]);
            second_moment += w * c * c;
        }
    }
    CHECK(area == Catch::Approx(4.0 * std::numbers::pi).epsilon(1e-13));
    CHECK(second_moment == Catch::Approx(4.0 * std::numbers::pi / 3.0).epsilon(1e-13));
}

TEST_CASE("angular rule handles azimuth-dependent integrands") {
    AngularRule rule = angular_rule(24, 12);
    double integral = 0.0;
    for (std::size_t j = 0; j < rule.thetas.size(); ++j) {
        for (std::size_t k = 0; k < rule.phis.size(); ++k) {
            double f = std::sin(rule.phis[k]) * std::cos(rule.thetas[j]);
            integral += rule.theta_weight * rule.phi_weights[k] * f * f;
        }
    }
    // int sin^2(phi) cos^2(theta) over the sphere = 4 pi / 3
    CHECK(integral == Catch::Approx(4.0 * std::numbers::pi / 3.0).epsilon(1e-12));
}

TEST_CASE("quadrature rejects out-of-range node counts") {
    CHECK_THROWS_AS(gauss_legendre(0), std::domain_error);
    CHECK_THROWS_AS(gauss_legendre(-3), std::domain_error);
    CHECK_THROWS_AS(angular_rule(0, 8), std::domain_error);
    CHECK_THROWS_AS(angular_rule(8, 0), std::domain_error);
}
