#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "ballspec/errors.hpp"
#include "ballspec/grid.hpp"

namespace ballspec {

// A set of 3-D sample points, each optionally carrying a scalar attribute
// (texture).  Without attributes every point counts as 1, so binned cells hold
// plain occupancy averages.
struct PointCloud {
    std::vector<std::array<double, 3>> points;
    std::vector<double> texture;  // empty, or one value per point

    std::size_t size() const { return points.size(); }

    void validate() const {
        if (!texture.empty() && texture.size() != points.size())
            throw input_error("texture count does not match point count");
        for (const auto& p : points)
            for (double c : p)
                if (!std::isfinite(c)) throw input_error("point cloud contains non-finite values");
        for (double t : texture)
            if (!std::isfinite(t)) throw input_error("texture contains non-finite values");
    }
};

// Center the cloud on its centroid and scale it so the farthest point sits at
// radius 0.95, keeping a margin inside the unit ball.
inline PointCloud normalize_cloud(const PointCloud& cloud, double target_radius = 0.95) {
    cloud.validate();
    if (cloud.points.empty()) throw input_error("cannot normalize an empty point cloud");
    if (!(target_radius > 0.0 && target_radius < 1.0))
        throw std::domain_error("target radius must lie in (0, 1)");
    // Sum each coordinate in value order so the result is independent of the
    // order the points arrive in.
    std::array<double, 3> centroid = {0.0, 0.0, 0.0};
    std::vector<double> column(cloud.points.size());
    for (int c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < cloud.points.size(); ++i) column[i] = cloud.points[i][c];
        std::sort(column.begin(), column.end());
        double sum = 0.0;
        for (double v : column) sum += v;
        centroid[c] = sum / static_cast<double>(cloud.points.size());
    }

    double max_norm = 0.0;
    for (const auto& p : cloud.points) {
        double d2 = 0.0;
        for (int c = 0; c < 3; ++c) d2 += (p[c] - centroid[c]) * (p[c] - centroid[c]);
        max_norm = std::max(max_norm, std::sqrt(d2));
    }
    if (max_norm < 1e-12)
        throw input_error("degenerate point cloud: all points coincide with the centroid");

    PointCloud out = cloud;
    double scale = target_radius / max_norm;
    for (auto& p : out.points)
        for (int c = 0; c < 3; ++c) p[c] = (p[c] - centroid[c]) * scale;
    return out;
}

// Average the point attributes into the cells of a spherical lattice.  Points
// must lie strictly inside the unit ball; cells that receive no points stay 0.
// Per-cell sums run over value-sorted attributes, so the grid is independent
// of point order.  counts_out, when given, receives the per-cell point tally.
inline BallGrid bin_cloud(const PointCloud& cloud, int n_r, int n_theta, int n_phi,
                          std::vector<int>* counts_out = nullptr) {
    cloud.validate();
    BallGrid grid(n_r, n_theta, n_phi);
    std::vector<std::vector<double>> cells(grid.cell_count());
    for (std::size_t idx = 0; idx < cloud.points.size(); ++idx) {
        const auto& p = cloud.points[idx];
        double r = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
        if (r >= 1.0)
            throw input_error("point at radius " + std::to_string(r) +
                              " lies outside the unit ball; normalize the cloud first");
        double theta = std::atan2(p[1], p[0]);
        if (theta < 0.0) theta += 2.0 * std::numbers::pi;
        double phi = (r > 0.0) ? std::acos(std::clamp(p[2] / r, -1.0, 1.0)) : 0.0;
        int i = std::min(static_cast<int>(r * n_r), n_r - 1);
        int j = std::min(static_cast<int>(theta / (2.0 * std::numbers::pi) * n_theta),
                         n_theta - 1);
        int k = std::min(static_cast<int>(phi / std::numbers::pi * n_phi), n_phi - 1);
        cells[grid.index(i, j, k)].push_back(cloud.texture.empty() ? 1.0 : cloud.texture[idx]);
    }
    if (counts_out) counts_out->assign(grid.cell_count(), 0);
    for (std::size_t c = 0; c < grid.cell_count(); ++c) {
        if (cells[c].empty()) continue;
        std::sort(cells[c].begin(), cells[c].end());
        double sum = 0.0;
        for (double v : cells[c]) sum += v;
        grid.values[c] = sum / static_cast<double>(cells[c].size());
        if (counts_out) (*counts_out)[c] = static_cast<int>(cells[c].size());
    }
    return grid;
}

inline BallGrid bin_cloud(const PointCloud& cloud) {
    BallGrid shape = BallGrid::standard();
    return bin_cloud(cloud, shape.n_r, shape.n_theta, shape.n_phi);
}

}  // namespace ballspec
