// Copyright 2026 The layered-garments Authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "layered/error.hpp"
#include "layered/extraction.hpp"
#include "layered/parallel.hpp"
#include "oracles.hpp"

using namespace layered;

namespace {

constexpr double kR = 0.1;
constexpr double kTau = 0.003;

double sphere_udf(const Vec3& p) { return std::abs(p.norm() - kR); }

Aabb cube_bounds(double h) { return Aabb{Vec3::Constant(-h), Vec3::Constant(h)}; }

// Trilinear interpolation of the grid at p.
double trilinear(const ScalarGrid& g, const Vec3& p) {
    const Vec3 q = (p - g.origin) / g.cell;
    int base[3];
    double frac[3];
    for (int a = 0; a < 3; ++a) {
        base[a] = std::clamp(static_cast<int>(std::floor(q[a])), 0, g.dims[static_cast<std::size_t>(a)] - 2);
        frac[a] = q[a] - base[a];
    }
    double sum = 0.0;
    for (int c = 0; c < 8; ++c) {
        const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
        const double w = (dx ? frac[0] : 1 - frac[0]) * (dy ? frac[1] : 1 - frac[1]) * (dz ? frac[2] : 1 - frac[2]);
        sum += w * g.at(base[0] + dx, base[1] + dy, base[2] + dz);
    }
    return sum;
}

// Largest distance from the mesh's vertices and face centroids to the two
// analytic shells, each point judged against the shell on its side.
double shell_error(const TriMesh& m) {
    auto err = [](const Vec3& p) {
        const double r = p.norm();
        return std::abs(r - (r < kR ? kR - kTau : kR + kTau));
    };
    double worst = 0.0;
    for (const auto& v : m.vertices) worst = std::max(worst, err(v));
    for (const auto& f : m.faces) worst = std::max(worst, err((m.vertices[f[0]] + m.vertices[f[1]] + m.vertices[f[2]]) / 3.0));
    return worst;
}

}  // namespace

TEST_CASE("grid layout and baking") {
    ScalarGrid g = make_grid_layout(Aabb{Vec3(0, 0, 0), Vec3(1, 0.5, 0.25)}, 5);
    CHECK(g.cell == 0.25);
    CHECK(g.dims == std::array<int, 3>{5, 3, 2});
    CHECK_THROWS_AS(make_grid_layout(cube_bounds(1), 1), Error);
    CHECK_THROWS_AS(make_grid_layout(Aabb{}, 8), Error);

    ScalarGrid c = bake_grid([](const Vec3&) { return 0.7; }, cube_bounds(1), 9);
    for (double v : c.values) CHECK(v == 0.7);

    ScalarGrid s = bake_grid(sphere_udf, cube_bounds(0.2), 17);
    for (int k = 0; k < s.dims[2]; ++k)
        for (int j = 0; j < s.dims[1]; ++j)
            for (int i = 0; i < s.dims[0]; ++i) CHECK(s.at(i, j, k) == std::abs(s.node(i, j, k).norm() - kR));

    SUBCASE("a network grid equals pointwise evaluation") {
        static constexpr int hidden[] = {16, 16};
        MlpUdf m = MlpUdf::create(2, hidden, 0.01, 3);
        for (Eigen::Index i = 0; i < m.weights.back().size(); ++i) m.weights.back()(i) = i % 2 ? 0.4 : -0.4;
        m.biases.back()(0) = 0.15;
        ScalarGrid n = bake_grid(m, cube_bounds(0.5), 21);
        int positive = 0;
        for (int k = 0; k < n.dims[2]; ++k)
            for (int j = 0; j < n.dims[1]; ++j)
                for (int i = 0; i < n.dims[0]; ++i) {
                    CHECK(n.at(i, j, k) == udf_eval(m, n.node(i, j, k)));
                    positive += n.at(i, j, k) > 0.0;
                }
        CHECK(positive > 0);
    }
    SUBCASE("extraction bounds leave two cells and tau of margin") {
        TriMesh sphere = make_icosphere(kR, 2);
        for (int res : {8, 32, 256}) {
            const Aabb b = extraction_bounds(sphere, res, kTau);
            const ScalarGrid layout = make_grid_layout(b, res);
            const Aabb tight = sphere.bounds();
            CHECK((tight.min - b.min).minCoeff() >= 2 * layout.cell + kTau - 1e-12);
            CHECK((b.max - tight.max).minCoeff() >= 2 * layout.cell + kTau - 1e-12);
        }
    }
}

TEST_CASE("marching_cubes: sphere distance field") {
    const ScalarGrid g = bake_grid(sphere_udf, cube_bounds(0.12), 97);  // 2.5 mm cells
    const IsoSurface iso = marching_cubes(g, kTau);
    REQUIRE_FALSE(iso.empty);
    const TriMesh& m = iso.mesh;
    m.validate();
    CHECK(count_nonmanifold_edges(m) == 0);
    CHECK(is_closed_oriented(m));
    std::vector<std::uint32_t> all(m.vertices.size());
    std::iota(all.begin(), all.end(), 0u);
    CHECK(connected_components(m, all).size() == 2);
    CHECK(shell_error(m) <= 0.5 * g.cell);

    double range = 0.0;
    for (double v : g.values) range = std::max(range, v);
    std::size_t outward = 0, inward = 0;
    for (std::size_t f = 0; f < m.faces.size(); ++f) {
        const Face& t = m.faces[f];
        const Vec3 c = (m.vertices[t[0]] + m.vertices[t[1]] + m.vertices[t[2]]) / 3.0;
        const double along = face_normal(m, f).dot(c.normalized());
        // Increasing values lie away from the sphere surface on both shells.
        if (c.norm() > kR) outward += along > 0.0;
        else inward += along < 0.0;
    }
    CHECK(outward + inward == m.faces.size());
    for (const auto& v : m.vertices) CHECK(std::abs(trilinear(g, v) - kTau) < 1e-6 * range);

    SUBCASE("thread count does not change the mesh") {
        const int before = thread_count();
        set_thread_count(1);
        const IsoSurface a = marching_cubes(g, kTau);
        set_thread_count(3);
        const IsoSurface b = marching_cubes(g, kTau);
        set_thread_count(before);
        CHECK(a.mesh.vertices == b.mesh.vertices);
        CHECK(a.mesh.faces == b.mesh.faces);
        CHECK(a.mesh.vertices == m.vertices);
    }
}

TEST_CASE("marching_cubes: refinement") {
    const double coarse = shell_error(marching_cubes(bake_grid(sphere_udf, cube_bounds(0.12), 49), kTau).mesh);
    const double fine = shell_error(marching_cubes(bake_grid(sphere_udf, cube_bounds(0.12), 97), kTau).mesh);
    CHECK(coarse / fine >= 1.8);
}

TEST_CASE("marching_cubes: plane distance field") {
    // Node rows at z = -0.05 + k * 0.01 keep z = 0 on a node.
    const ScalarGrid g = bake_grid([](const Vec3& p) { return std::abs(p.z()); }, Aabb{Vec3(-0.05, -0.05, -0.05), Vec3(0.05, 0.05, 0.05)}, 11);
    const IsoSurface iso = marching_cubes(g, kTau);
    REQUIRE_FALSE(iso.empty);
    std::size_t above = 0, below = 0;
    for (const auto& v : iso.mesh.vertices) {
        CHECK(std::abs(std::abs(v.z()) - kTau) < 1e-12);
        (v.z() > 0 ? above : below) += 1;
    }
    CHECK(above == below);
    for (std::size_t f = 0; f < iso.mesh.faces.size(); ++f) {
        const Vec3 n = face_normal(iso.mesh, f);
        const double z = iso.mesh.vertices[iso.mesh.faces[f][0]].z();
        CHECK(n.z() * z > 0.99 * std::abs(z));  // sheets face away from z = 0
    }
}

TEST_CASE("marching_cubes: empty level set") {
    const ScalarGrid g = bake_grid([](const Vec3&) { return 1.0; }, cube_bounds(1), 6);
    const IsoSurface iso = marching_cubes(g, kTau);
    CHECK(iso.empty);
    CHECK(iso.mesh.vertices.empty());
    ScalarGrid bad = g;
    bad.values.pop_back();
    CHECK_THROWS_AS(marching_cubes(bad, kTau), Error);
}

TEST_CASE("orient_back_faces") {
    const Vec3 origin = Vec3::Zero(), dz(0, 0, 1);
    const std::vector<Vec3> joint{origin};
    TriMesh tri;
    tri.vertices = {Vec3(0, 0, 1), Vec3(1, 0, 1), Vec3(0, 1, 1)};
    tri.faces = {Face{0, 1, 2}};
    std::size_t flipped = 0;
    CHECK(orient_back_faces(tri, joint, dz, 0.0, &flipped).faces[0] == Face{2, 1, 0});
    CHECK(flipped == 1);
    tri.vertices[2].z() = -0.5;
    CHECK(orient_back_faces(tri, joint, dz, 0.0, &flipped).faces[0] == Face{0, 1, 2});
    CHECK(flipped == 0);
    CHECK_THROWS_AS(orient_back_faces(tri, {}, dz, 0.0), Error);
    CHECK_THROWS_AS(orient_back_faces(tri, joint, Vec3(0, 0, 2), 0.0), Error);

    SUBCASE("double-sided sphere shell") {
        const TriMesh shell = marching_cubes(bake_grid(sphere_udf, cube_bounds(0.12), 49), kTau).mesh;
        const double xi = 0.005;
        const TriMesh out = orient_back_faces(shell, joint, dz, xi, &flipped);
        std::size_t brute = 0;
        for (std::size_t f = 0; f < shell.faces.size(); ++f) {
            const Face& t = shell.faces[f];
            const bool all = shell.vertices[t[0]].z() > xi && shell.vertices[t[1]].z() > xi && shell.vertices[t[2]].z() > xi;
            brute += all;
            CHECK(out.faces[f] == (all ? Face{t[2], t[1], t[0]} : t));
        }
        CHECK(flipped == brute);
        CHECK(flipped > shell.faces.size() / 4);
        CHECK(flipped < shell.faces.size() / 2);
        // Applying it again restores the original winding.
        CHECK(orient_back_faces(out, joint, dz, xi).faces == shell.faces);
        CHECK(out.vertices == shell.vertices);
    }
    SUBCASE("nearest joint decides") {
        const std::vector<Vec3> joints{Vec3(0, 0, 0), Vec3(10, 0, 5)};
        TriMesh far = tri;
        far.vertices = {Vec3(10, 0, 5.5), Vec3(11, 0, 5.5), Vec3(10, 1, 5.5)};
        CHECK(orient_back_faces(far, joints, dz, 0.4, &flipped).faces[0] == Face{2, 1, 0});
        CHECK(orient_back_faces(far, joints, dz, 0.6, &flipped).faces[0] == Face{0, 1, 2});
    }
}

TEST_CASE("grid dump round trip") {
    auto dir = std::filesystem::temp_directory_path() / "layered_test_extraction";
    std::filesystem::create_directories(dir);
    const ScalarGrid g = bake_grid(sphere_udf, cube_bounds(0.12), 9);
    save_grid(dir / "g.bin", g);
    const ScalarGrid back = load_grid(dir / "g.bin");
    CHECK(back.origin == g.origin);
    CHECK(back.cell == g.cell);
    CHECK(back.dims == g.dims);
    for (std::size_t i = 0; i < g.values.size(); ++i) CHECK(back.values[i] == static_cast<double>(static_cast<float>(g.values[i])));
    {
        std::ofstream bad(dir / "bad.bin", std::ios::binary);
        bad << "LGRDxx";
    }
    CHECK_THROWS_AS(load_grid(dir / "bad.bin"), Error);
}
