// Copyright 2026 The layered-garments Authors
// SPDX-License-Identifier: Apache-2.0
#include "layered/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "layered/error.hpp"

namespace layered {

namespace {

constexpr double kPi = std::numbers::pi;

// Point on the capsule profile: radius from the axis, height, and the
// outward normal in the (radial, vertical) plane.
struct ProfilePoint {
    double rho, y, n_rho, n_y;
};

ProfilePoint profile(const FixtureSpec& spec, double s) {
    const double r = spec.radius, len = spec.joints * spec.segment_length, quarter = 0.5 * kPi * r;
    if (s < quarter) {
        const double phi = s / r;
        return {r * std::sin(phi), -r * std::cos(phi), std::sin(phi), -std::cos(phi)};
    }
    if (s <= quarter + len) return {r, s - quarter, 1.0, 0.0};
    const double phi = (s - quarter - len) / r;
    return {r * std::cos(phi), len + r * std::sin(phi), std::cos(phi), std::sin(phi)};
}

// Body tessellation with the analytic normal of every vertex.
struct Capsule {
    TriMesh mesh;
    std::vector<Vec3> normals;
};

Capsule make_capsule(const FixtureSpec& spec) {
    const double r = spec.radius, len = spec.joints * spec.segment_length;
    const double total = kPi * r + len;
    const int segs = spec.segments, rings = spec.rings;
    Capsule c;
    auto& v = c.mesh.vertices;
    v.push_back(Vec3(0, -r, 0));
    c.normals.push_back(-Vec3::UnitY());
    for (int i = 1; i <= rings; ++i) {
        const ProfilePoint p = profile(spec, total * i / (rings + 1));
        for (int j = 0; j < segs; ++j) {
            const double th = 2.0 * kPi * j / segs;
            const double cs = std::cos(th), sn = std::sin(th);
            v.push_back(Vec3(p.rho * cs, p.y, -p.rho * sn));
            c.normals.push_back(Vec3(p.n_rho * cs, p.n_y, -p.n_rho * sn));
        }
    }
    v.push_back(Vec3(0, len + r, 0));
    c.normals.push_back(Vec3::UnitY());

    const auto top = static_cast<std::uint32_t>(v.size() - 1);
    auto ring = [&](int i, int j) { return static_cast<std::uint32_t>(1 + (i - 1) * segs + (j % segs)); };
    auto& f = c.mesh.faces;
    for (int j = 0; j < segs; ++j) f.push_back({0, ring(1, j + 1), ring(1, j)});
    for (int i = 1; i < rings; ++i) {
        for (int j = 0; j < segs; ++j) {
            f.push_back({ring(i, j), ring(i, j + 1), ring(i + 1, j + 1)});
            f.push_back({ring(i, j), ring(i + 1, j + 1), ring(i + 1, j)});
        }
    }
    for (int j = 0; j < segs; ++j) f.push_back({ring(rings, j), ring(rings, j + 1), top});
    return c;
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

double layer_offset(const FixtureSpec& spec, const GarmentSpec& g, double u) {
    const double d = std::max({g.coverage_lo - u, u - g.coverage_hi, 0.0});
    if (d == 0.0) return g.offset;
    if (d >= spec.blend_band) return spec.hug_offset;
    return g.offset + (spec.hug_offset - g.offset) * smoothstep(d / spec.blend_band);
}

bool covered(const GarmentSpec& g, double u) { return u >= g.coverage_lo && u <= g.coverage_hi; }

std::uint64_t layer_seed(std::uint64_t seed, std::size_t k) { return seed * 0x9E3779B97F4A7C15ull + 0x51ED27ull * (k + 1); }

// Pushed vertex sets for layers 0..k, computed inner to outer.
std::vector<std::vector<std::uint32_t>> pushed_sets(const FixtureSpec& spec, const Capsule& cap, std::size_t k) {
    std::vector<std::vector<std::uint32_t>> out;
    std::vector<std::vector<std::uint32_t>> adjacency;
    for (std::size_t layer = 0; layer <= k; ++layer) {
        const GarmentSpec& g = spec.layers[layer];
        std::vector<std::uint32_t> chosen;
        if (g.penetration_fraction > 0.0) {
            if (adjacency.empty()) adjacency = vertex_adjacency(cap.mesh);
            std::vector<bool> blocked(cap.mesh.vertices.size(), false);
            if (layer > 0) {
                for (auto p : out[layer - 1]) {
                    blocked[p] = true;
                    for (auto q : adjacency[p]) blocked[q] = true;
                }
            }
            std::vector<std::uint32_t> s_count, candidates;
            for (std::uint32_t v = 0; v < cap.mesh.vertices.size(); ++v) {
                if (!covered(g, body_height_parameter(spec, cap.mesh.vertices[v]))) continue;
                s_count.push_back(v);
                if (!blocked[v]) candidates.push_back(v);
            }
            const auto want = static_cast<std::size_t>(std::llround(g.penetration_fraction * s_count.size()));
            if (want > candidates.size()) {
                throw Error(ErrorKind::InvalidInput, "layer " + std::to_string(layer + 1) + " cannot seed " +
                                                         std::to_string(want) + " penetrations");
            }
            std::mt19937_64 rng(layer_seed(spec.seed, layer));
            // Penetrations come in patches: a random seed vertex plus its
            // free one-ring. Seeds are drawn by partial Fisher-Yates with
            // explicit draws; std::shuffle's algorithm is implementation-defined.
            std::vector<bool> free(cap.mesh.vertices.size(), false), taken(cap.mesh.vertices.size(), false);
            for (auto v : candidates) free[v] = true;
            auto take = [&](std::uint32_t v) {
                if (!free[v] || taken[v] || chosen.size() == want) return;
                taken[v] = true;
                chosen.push_back(v);
            };
            for (std::size_t i = 0; chosen.size() < want; ++i) {
                const std::size_t pick = i + static_cast<std::size_t>(rng() % (candidates.size() - i));
                std::swap(candidates[i], candidates[pick]);
                const std::uint32_t seed = candidates[i];
                if (taken[seed]) continue;
                take(seed);
                for (auto q : adjacency[seed]) take(q);
            }
            std::sort(chosen.begin(), chosen.end());
        }
        out.push_back(std::move(chosen));
    }
    return out;
}

}  // namespace

void FixtureSpec::validate() const {
    auto bad = [](const std::string& m) { throw Error(ErrorKind::InvalidInput, "fixture spec: " + m); };
    if (joints < 1) bad("joint count must be at least 1");
    if (!(segment_length > 0.0) || !(radius > 0.0)) bad("segment length and radius must be positive");
    if (segments < 3 || rings < 1) bad("tessellation needs at least 3 segments and 1 ring");
    if (!(hug_offset > 0.0) || !(blend_band > 0.0)) bad("hug offset and blend band must be positive");
    for (std::size_t k = 0; k < layers.size(); ++k) {
        const auto& g = layers[k];
        const std::string name = "layer " + std::to_string(k + 1);
        if (!(g.offset > hug_offset)) bad(name + " offset must exceed the hug offset");
        if (!(g.coverage_lo >= 0.0 && g.coverage_lo <= g.coverage_hi && g.coverage_hi <= 1.0)) {
            bad(name + " coverage must be an interval inside [0, 1]");
        }
        if (!(g.penetration_fraction >= 0.0 && g.penetration_fraction <= 1.0)) bad(name + " penetration fraction");
        if (!(g.penetration_depth > 0.0)) bad(name + " penetration depth must be positive");
        if (k > 0 && !(g.offset > layers[k - 1].offset)) bad(name + " offset must exceed the layer below");
    }
}

FixtureSpec FixtureSpec::standard(double penetration_fraction) {
    FixtureSpec spec;
    spec.layers = {{0.010, 0.0, 0.5, penetration_fraction},
                   {0.020, 0.4, 0.9, penetration_fraction},
                   {0.030, 0.3, 1.0, penetration_fraction}};
    return spec;
}

double body_height_parameter(const FixtureSpec& spec, const Vec3& p) {
    const double len = spec.joints * spec.segment_length;
    return std::clamp((p.y() + spec.radius) / (len + 2.0 * spec.radius), 0.0, 1.0);
}

SkinnedBody make_body(const FixtureSpec& spec) {
    spec.validate();
    Capsule cap = make_capsule(spec);
    SkinnedBody body;
    const auto joints = static_cast<std::size_t>(spec.joints);
    for (std::size_t j = 0; j < joints; ++j) body.joints.push_back(Vec3(0, (j + 0.5) * spec.segment_length, 0));
    body.weights = WeightField(cap.mesh.vertices.size(), joints);
    for (std::size_t v = 0; v < cap.mesh.vertices.size(); ++v) {
        auto row = body.weights.row(v);
        if (joints == 1) {
            row[0] = 1.0;
            continue;
        }
        const double y = std::clamp(cap.mesh.vertices[v].y(), body.joints.front().y(), body.joints.back().y());
        const double x = (y - body.joints.front().y()) / spec.segment_length;
        const auto j = std::min(static_cast<std::size_t>(x), joints - 2);
        const double s = smoothstep(x - j);
        row[j] = 1.0 - s;
        row[j + 1] = s;
    }
    body.mesh = std::move(cap.mesh);
    return body;
}

TriMesh make_garment_layer(const FixtureSpec& spec, std::size_t k, std::vector<std::uint32_t>* pushed) {
    spec.validate();
    if (k >= spec.layers.size()) throw Error(ErrorKind::InvalidInput, "fixture has no layer " + std::to_string(k + 1));
    const Capsule cap = make_capsule(spec);
    const GarmentSpec& g = spec.layers[k];
    TriMesh out = cap.mesh;
    out.labels = std::vector<int>(out.vertices.size(), 0);
    for (std::size_t v = 0; v < out.vertices.size(); ++v) {
        const double u = body_height_parameter(spec, cap.mesh.vertices[v]);
        out.vertices[v] = cap.mesh.vertices[v] + layer_offset(spec, g, u) * cap.normals[v];
        (*out.labels)[v] = covered(g, u) ? 1 : 0;
    }
    const auto sets = pushed_sets(spec, cap, k);
    for (auto v : sets[k]) {
        const double u = body_height_parameter(spec, cap.mesh.vertices[v]);
        const double below = k == 0 ? 0.0 : layer_offset(spec, spec.layers[k - 1], u);
        out.vertices[v] = cap.mesh.vertices[v] + (below - g.penetration_depth) * cap.normals[v];
    }
    if (pushed) *pushed = sets[k];
    return out;
}

Pose perturb_pose(const SkinnedBody& body, double magnitude, std::uint64_t seed) {
    if (!(magnitude >= 0.0)) throw Error(ErrorKind::InvalidInput, "pose magnitude must be non-negative");
    const auto centers = body.rest_joint_positions();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto direction = [&]() {
        Vec3 d(gauss(rng), gauss(rng), gauss(rng));
        return d.norm() > 0.0 ? Vec3(d.normalized()) : Vec3(Vec3::UnitX());
    };
    const Vec3 shift = direction() * (0.05 * magnitude * unit(rng));
    Pose pose;
    for (const Vec3& c : centers) {
        const Vec3 axis = direction();
        const Mat3 r = Eigen::AngleAxisd(magnitude * unit(rng), axis).toRotationMatrix();
        Mat4 b = Mat4::Identity();
        b.topLeftCorner<3, 3>() = r;
        b.topRightCorner<3, 1>() = c - r * c + shift;
        pose.bones.push_back(b);
    }
    return pose;
}

}  // namespace layered
