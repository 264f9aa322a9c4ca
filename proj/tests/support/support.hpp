#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "lamina/mesh.hpp"

namespace lamina::testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

inline Vec3 random_vec(Rng& rng, double scale = 1.0) {
    return Vec3(uniform(rng, -scale, scale), uniform(rng, -scale, scale), uniform(rng, -scale, scale));
}

inline Vec3 random_unit(Rng& rng) {
    std::normal_distribution<double> n;
    Vec3 v(n(rng), n(rng), n(rng));
    return v.normalized();
}

/// Uniform random rotation from a random unit quaternion.
inline Mat3 random_rotation(Rng& rng) {
    std::normal_distribution<double> n;
    Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
    q.normalize();
    return q.toRotationMatrix();
}

inline double rel_diff(double a, double b, double floor = 1e-300) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// (nx+1) x (ny+1) vertex grid on [0, sx] x [0, sy] in the plane z = z0, counter-clockwise
/// seen from +z. Alternating diagonals when `alternate` is set.
inline TriMesh planar_grid(int nx, int ny, double sx = 1.0, double sy = 1.0, double z0 = 0.0, bool alternate = false) {
    TriMesh m;
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i) m.vertices.emplace_back(sx * i / nx, sy * j / ny, z0);
    auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const int a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
            if (alternate && (i + j) % 2) {
                m.faces.push_back({a, b, d});
                m.faces.push_back({b, c, d});
            } else {
                m.faces.push_back({a, b, c});
                m.faces.push_back({a, c, d});
            }
        }
    return m;
}

/// Small random bumpy open patch: a planar grid with random height and in-plane jitter.
inline TriMesh random_patch(Rng& rng, int n = 4, double size = 1.0, double bump = 0.2) {
    TriMesh m = planar_grid(n, n, size, size, 0.0, true);
    const double h = size / n;
    for (Vec3& p : m.vertices) {
        p.x() += uniform(rng, -0.2, 0.2) * h;
        p.y() += uniform(rng, -0.2, 0.2) * h;
        p.z() += uniform(rng, -bump, bump) * size;
    }
    return m;
}

/// Runs `body(rng, case_index)` for `cases` independently seeded cases and returns how many passed.
inline int for_cases(int cases, std::uint64_t seed, const std::function<bool(Rng&, int)>& body) {
    int passed = 0;
    for (int c = 0; c < cases; ++c) {
        Rng rng(seed * 1000003ULL + static_cast<std::uint64_t>(c));
        if (body(rng, c)) ++passed;
    }
    return passed;
}

}  // namespace lamina::testing
