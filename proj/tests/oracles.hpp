// Copyright 2026 The layered-garments Authors
// SPDX-License-Identifier: Apache-2.0
//
// Brute-force reference implementations used only by tests. They share the
// per-triangle primitives with the library but none of its acceleration.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "layered/geometry.hpp"
#include "layered/spatial_index.hpp"

namespace layered::oracle {

inline ClosestHit closest_point(const TriMesh& m, const Vec3& q) {
    ClosestHit best;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::uint32_t f = 0; f < m.faces.size(); ++f) {
        const auto& t = m.faces[f];
        Vec3 p = closest_point_on_triangle(q, m.vertices[t[0]], m.vertices[t[1]], m.vertices[t[2]]);
        double d2 = (p - q).squaredNorm();
        if (d2 < best_d2) {
            best_d2 = d2;
            best.point = p;
            best.face = f;
        }
    }
    best.distance = std::sqrt(best_d2);
    return best;
}

inline std::vector<RayHit> ray_hits(const TriMesh& m, const Vec3& o, const Vec3& d) {
    std::vector<RayHit> hits;
    for (std::uint32_t f = 0; f < m.faces.size(); ++f) {
        const auto& t = m.faces[f];
        auto h = ray_triangle(o, d, m.vertices[t[0]], m.vertices[t[1]], m.vertices[t[2]]);
        if (h && *h > kRayEpsilon) hits.push_back({*h, f});
    }
    std::sort(hits.begin(), hits.end(), [](auto a, auto b) { return a.t != b.t ? a.t < b.t : a.face < b.face; });
    return hits;
}

inline double winding(const TriMesh& m, const Vec3& q) {
    double s = 0.0;
    for (const auto& t : m.faces) s += triangle_solid_angle(q, m.vertices[t[0]], m.vertices[t[1]], m.vertices[t[2]]);
    return s / (4.0 * std::numbers::pi);
}

/// Inside test by crossing parity along a fixed, generic direction.
inline bool ray_parity_inside(const TriMesh& m, const Vec3& q) {
    const Vec3 d = Vec3(0.5377, 0.8338, -0.1269).normalized();
    return ray_hits(m, q, d).size() % 2 == 1;
}

inline Vec3 random_point(std::mt19937_64& rng, const Aabb& box) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Vec3 p;
    for (int a = 0; a < 3; ++a) p[a] = box.min[a] + u(rng) * (box.max[a] - box.min[a]);
    return p;
}

inline Vec3 random_unit(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Vec3 d(n(rng), n(rng), n(rng));
    return d.normalized();
}

/// Icosphere with every vertex moved radially by a seeded random factor;
/// stays closed and star-shaped.
inline TriMesh bumpy_sphere(int subdiv, double radius, double amplitude, std::uint64_t seed) {
    TriMesh m = make_icosphere(radius, subdiv);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-amplitude, amplitude);
    for (auto& v : m.vertices) v *= 1.0 + u(rng);
    return m;
}

/// Unstructured triangle soup inside the unit box.
inline TriMesh triangle_soup(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0), s(-0.03, 0.03);
    TriMesh m;
    for (std::size_t i = 0; i < n; ++i) {
        Vec3 c(u(rng), u(rng), u(rng));
        auto base = static_cast<std::uint32_t>(m.vertices.size());
        for (int k = 0; k < 3; ++k) m.vertices.push_back(c + Vec3(s(rng), s(rng), s(rng)));
        m.faces.push_back({base, base + 1, base + 2});
    }
    return m;
}

}  // namespace layered::oracle
