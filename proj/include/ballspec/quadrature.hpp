#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace ballspec {

// Nodes and weights of a 1-D quadrature rule.
struct QuadRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

namespace detail {

// Legendre P_n(x) and its derivative by the standard three-term recurrence.
inline std::pair<double, double> legendre_with_derivative(int n, double x) {
    double p0 = 1.0, p1 = x;
    if (n == 0) return {1.0, 0.0};
    for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    double dp = n * (x * p1 - p0) / (x * x - 1.0);
    return {p1, dp};
}

inline QuadRule compute_gauss_legendre(int n) {
    QuadRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        // Tricomi initial guess, then Newton.
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        for (int it = 0; it < 100; ++it) {
            auto [p, dp] = legendre_with_derivative(n, x);
            double dx = p / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        auto [p, dp] = legendre_with_derivative(n, x);
        (void)p;
        double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[i] = -x;
        rule.weights[i] = w;
        rule.nodes[n - 1 - i] = x;
        rule.weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
    return rule;
}

}  // namespace detail

// Gauss-Legendre rule on [-1, 1], cached per node count.
inline const QuadRule& gauss_legendre(int n) {
    if (n < 1 || n > 4096) throw std::domain_error("gauss_legendre: node count out of range");
    static std::map<int, QuadRule> cache;
    static std::mutex mutex;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, detail::compute_gauss_legendre(n)).first;
    return it->second;
}

// Gauss-Legendre rule mapped to [0, 1], cached per node count.
inline const QuadRule& gauss_legendre_01(int n) {
    static std::map<int, QuadRule> cache;
    static std::mutex mutex;
    {
        std::lock_guard<std::mutex> lock(mutex);
        auto it = cache.find(n);
        if (it != cache.end()) return it->second;
    }
    const QuadRule& base = gauss_legendre(n);
    QuadRule mapped;
    mapped.nodes.resize(n);
    mapped.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        mapped.nodes[i] = 0.5 * (base.nodes[i] + 1.0);
        mapped.weights[i] = 0.5 * base.weights[i];
    }
    std::lock_guard<std::mutex> lock(mutex);
    return cache.emplace(n, std::move(mapped)).first->second;
}

// Product rule over the sphere: midpoint nodes in azimuth theta (uniform weight
// 2*pi/n_theta) crossed with Gauss-Legendre nodes in cos(phi) for the polar
// angle, so that sum_{j,k} F(theta_j, phi_k) * theta_weight * phi_weights[k]
// approximates the integral of F over the sphere with the sin(phi) area factor
// already absorbed into the weights.
struct AngularRule {
    std::vector<double> thetas;
    double theta_weight = 0.0;
    std::vector<double> phis;
    std::vector<double> phi_weights;
};

inline AngularRule angular_rule(int n_theta, int n_phi) {
    if (n_theta < 1 || n_phi < 1) throw std::domain_error("angular_rule: counts must be positive");
    AngularRule rule;
    rule.thetas.resize(n_theta);
    for (int j = 0; j < n_theta; ++j)
        rule.thetas[j] = 2.0 * std::numbers::pi * (j + 0.5) / n_theta;
    rule.theta_weight = 2.0 * std::numbers::pi / n_theta;
    const QuadRule& gl = gauss_legendre(n_phi);
    rule.phis.resize(n_phi);
    rule.phi_weights.resize(n_phi);
    for (int k = 0; k < n_phi; ++k) {
        // Descending in cos(phi) gives phi increasing from pole to pole.
        double c = gl.nodes[n_phi - 1 - k];
        rule.phis[k] = std::acos(c);
        rule.phi_weights[k] = gl.weights[n_phi - 1 - k];
    }
    return rule;
}

}  // namespace ballspec
