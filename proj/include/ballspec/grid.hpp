#pragma once

#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace ballspec {

// Regular cell-centered lattice over the unit ball in spherical coordinates:
// radius r in [0, 1], azimuth theta in [0, 2 pi), polar angle phi in [0, pi].
// The same layout doubles as the query lattice of a convolution, where the
// three axes are read as (shift distance, aim azimuth, aim polar angle).
struct BallGrid {
    int n_r = 0, n_theta = 0, n_phi = 0;
    std::vector<double> values;

    BallGrid() = default;
    BallGrid(int n_r, int n_theta, int n_phi) : n_r(n_r), n_theta(n_theta), n_phi(n_phi) {
        if (n_r < 1 || n_theta < 1 || n_phi < 1)
            throw std::domain_error("grid dimensions must be positive");
        if (static_cast<long long>(n_r) * n_theta * n_phi > 50'000'000)
            throw std::domain_error("grid is too large");
        values.assign(static_cast<std::size_t>(n_r) * n_theta * n_phi, 0.0);
    }

    static BallGrid standard() { return BallGrid(25, 36, 18); }

    std::size_t cell_count() const { return values.size(); }

    std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(i) * n_theta + j) * n_phi + k;
    }

    double& at(int i, int j, int k) { return values[index(i, j, k)]; }
    double at(int i, int j, int k) const { return values[index(i, j, k)]; }

    double r_center(int i) const { return (i + 0.5) / n_r; }
    double theta_center(int j) const { return 2.0 * std::numbers::pi * (j + 0.5) / n_theta; }
    double phi_center(int k) const { return std::numbers::pi * (k + 0.5) / n_phi; }

    double delta_r() const { return 1.0 / n_r; }
    double delta_theta() const { return 2.0 * std::numbers::pi / n_theta; }
    double delta_phi() const { return std::numbers::pi / n_phi; }

    bool same_shape(const BallGrid& other) const {
        return n_r == other.n_r && n_theta == other.n_theta && n_phi == other.n_phi;
    }
};

}  // namespace ballspec
