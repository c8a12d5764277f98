// Copyright 2026 The layered-garments Authors
// SPDX-License-Identifier: Apache-2.0
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "layered/error.hpp"
#include "layered/geometry.hpp"
#include "layered/mesh_io.hpp"
#include "layered/spatial_index.hpp"
#include "oracles.hpp"

using namespace layered;
namespace fs = std::filesystem;

TEST_CASE("build_index") {
    SUBCASE("empty mesh is rejected") {
        TriMesh empty;
        CHECK_THROWS_AS(SpatialIndex{empty}, Error);
    }
    SUBCASE("single triangle gives one leaf") {
        TriMesh m;
        m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
        m.faces = {{0, 1, 2}};
        SpatialIndex index(m);
        CHECK(index.leaf_count() == 1);
    }
    SUBCASE("cube root bound equals the cube bound") {
        SpatialIndex index(make_unit_cube());
        CHECK(index.bounds().min.isApprox(Vec3(0, 0, 0)));
        CHECK(index.bounds().max.isApprox(Vec3(1, 1, 1)));
    }
    SUBCASE("every face sits in exactly one leaf and leaves bound their faces") {
        const TriMesh soup = oracle::triangle_soup(10000, 7);
        SpatialIndex index(soup);
        std::vector<int> seen(soup.faces.size(), 0);
        for (const auto& node : index.nodes()) {
            if (!node.leaf) continue;
            for (std::uint32_t i = node.left; i < node.left + node.right; ++i) {
                const auto f = index.face_order()[i];
                ++seen[f];
                for (auto v : soup.faces[f]) CHECK(node.box.contains(soup.vertices[v]));
            }
        }
        CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
    }
    SUBCASE("10k-face soup answers like a brute-force scan") {
        const TriMesh soup = oracle::triangle_soup(10000, 11);
        SpatialIndex index(soup);
        std::mt19937_64 rng(3);
        for (int i = 0; i < 200; ++i) {
            Vec3 q = oracle::random_point(rng, soup.bounds().inflated(0.2));
            auto a = index.closest_point(q);
            auto b = oracle::closest_point(soup, q);
            CHECK(std::abs(a.distance - b.distance) < 1e-9);
            Vec3 d = oracle::random_unit(rng);
            auto ha = index.ray_intersections(q, d);
            auto hb = oracle::ray_hits(soup, q, d);
            REQUIRE(ha.size() == hb.size());
            for (std::size_t k = 0; k < ha.size(); ++k) {
                CHECK(ha[k].face == hb[k].face);
                CHECK(std::abs(ha[k].t - hb[k].t) < 1e-9);
            }
        }
    }
}

TEST_CASE("closest_point") {
    SpatialIndex cube(make_unit_cube());
    SUBCASE("axis-aligned offset") {
        auto hit = cube.closest_point({2.0, 0.5, 0.5});
        CHECK((hit.point - Vec3(1, 0.5, 0.5)).norm() < 1e-12);
        CHECK(hit.distance == doctest::Approx(1.0));
    }
    SUBCASE("surface point has zero distance") {
        CHECK(cube.closest_point({0.3, 0.0, 0.7}).distance < 1e-15);
    }
    SUBCASE("returned point lies on the returned face") {
        auto hit = cube.closest_point({-0.4, 0.2, 1.7});
        const auto& t = cube.mesh().faces[hit.face];
        const auto& v = cube.mesh().vertices;
        Vec3 again = closest_point_on_triangle(hit.point, v[t[0]], v[t[1]], v[t[2]]);
        CHECK((again - hit.point).norm() < 1e-12);
    }
    SUBCASE("ties resolve to the lowest face id") {
        // Cube centroid is equidistant from all six sides.
        auto hit = cube.closest_point({0.5, 0.5, 0.5});
        auto brute = oracle::closest_point(cube.mesh(), {0.5, 0.5, 0.5});
        CHECK(hit.face == brute.face);
    }
    SUBCASE("1000 random queries vs a 5k-face mesh") {
        const TriMesh m = oracle::bumpy_sphere(4, 1.0, 0.1, 5);
        REQUIRE(m.faces.size() == 5120);
        SpatialIndex index(m);
        std::mt19937_64 rng(17);
        double worst = 0.0;
        for (int i = 0; i < 1000; ++i) {
            Vec3 q = oracle::random_point(rng, m.bounds().inflated(0.5));
            worst = std::max(worst, std::abs(index.closest_point(q).distance - oracle::closest_point(m, q).distance));
        }
        CHECK(worst < 1e-9);
    }
}

TEST_CASE("ray_intersections") {
    const TriMesh sphere = make_icosphere(1.0, 4);
    SpatialIndex index(sphere);
    SUBCASE("through the center: two hits near r") {
        const Vec3 d = Vec3(0.3, -0.2, 0.9).normalized();
        auto hits = index.ray_intersections(Vec3::Zero() - 3.0 * d, d);
        REQUIRE(hits.size() == 2);
        CHECK(std::abs(hits[0].t - 2.0) < 0.01);
        CHECK(std::abs(hits[1].t - 4.0) < 0.01);
    }
    SUBCASE("miss gives an empty list") {
        CHECK(index.ray_intersections({5, 5, 5}, Vec3(1, 0, 0)).empty());
    }
    SUBCASE("zero direction is rejected") {
        CHECK_THROWS_AS(index.ray_intersections({0, 0, 0}, Vec3::Zero()), Error);
    }
    SUBCASE("hit points lie on their faces") {
        const Vec3 o(0.1, 0.05, -2.0);
        const Vec3 d = Vec3(0.02, 0.01, 1.0).normalized();
        for (const auto& h : index.ray_intersections(o, d)) {
            const auto& t = sphere.faces[h.face];
            Vec3 p = o + h.t * d;
            Vec3 c = closest_point_on_triangle(p, sphere.vertices[t[0]], sphere.vertices[t[1]], sphere.vertices[t[2]]);
            CHECK((p - c).norm() < 1e-7);
        }
    }
    SUBCASE("rays through shared vertices are not lost") {
        // Aim at every vertex from far inside along its radius; the last
        // crossing must be the vertex itself.
        for (const Vec3& p : sphere.vertices) {
            const Vec3 n = p.normalized();
            const auto hits = index.ray_intersections(p - 3.0 * n, n);
            REQUIRE_FALSE(hits.empty());
            CHECK(std::abs(hits.back().t - 3.0) < 1e-9);
        }
    }
    SUBCASE("parity of cube hits matches containment") {
        SpatialIndex cube(make_unit_cube());
        std::mt19937_64 rng(23);
        for (int i = 0; i < 500; ++i) {
            Vec3 q = oracle::random_point(rng, Aabb{Vec3::Constant(-0.5), Vec3::Constant(1.5)});
            Vec3 d = oracle::random_unit(rng);
            bool inside = (q.array() > 0.0).all() && (q.array() < 1.0).all();
            auto hits = cube.ray_intersections(q, d);
            CHECK(hits.size() == oracle::ray_hits(cube.mesh(), q, d).size());
            CHECK((hits.size() % 2 == 1) == inside);
        }
    }
}

TEST_CASE("contains_point and winding number") {
    SpatialIndex cube(make_unit_cube());
    CHECK(cube.contains({0.5, 0.5, 0.5}));
    CHECK_FALSE(cube.contains({17.0, 0.0, 0.0}));
    CHECK(cube.winding_number({0.5, 0.5, 0.5}) == doctest::Approx(1.0).epsilon(1e-12));

    SUBCASE("hierarchical winding equals the full sum") {
        const TriMesh m = oracle::bumpy_sphere(4, 1.0, 0.2, 9);
        SpatialIndex index(m);
        std::mt19937_64 rng(29);
        for (int i = 0; i < 300; ++i) {
            Vec3 q = oracle::random_point(rng, m.bounds().inflated(0.3));
            CHECK(std::abs(index.winding_number(q) - oracle::winding(m, q)) < 1e-9);
        }
    }
    SUBCASE("open patches: hierarchical winding equals the full sum") {
        const TriMesh grid = make_grid(40, 40, 1.0);
        SpatialIndex index(grid);
        std::mt19937_64 rng(31);
        for (int i = 0; i < 200; ++i) {
            Vec3 q = oracle::random_point(rng, Aabb{Vec3::Constant(-1.0), Vec3::Constant(1.0)});
            CHECK(std::abs(index.winding_number(q) - oracle::winding(grid, q)) < 1e-9);
        }
    }
    SUBCASE("1000 random points vs icosphere match ray parity") {
        const TriMesh sphere = make_icosphere(1.0, 3);
        SpatialIndex index(sphere);
        std::mt19937_64 rng(37);
        int compared = 0;
        for (int i = 0; i < 1000; ++i) {
            Vec3 q = oracle::random_point(rng, sphere.bounds().inflated(0.4));
            if (index.unsigned_distance(q) < 1e-6) continue;
            ++compared;
            CHECK(index.contains(q) == oracle::ray_parity_inside(sphere, q));
        }
        CHECK(compared > 990);
    }
}

TEST_CASE("unsigned_distance") {
    const TriMesh sphere = make_icosphere(1.0, 5);
    SpatialIndex index(sphere);
    CHECK(index.unsigned_distance(sphere.vertices[17]) == 0.0);
    CHECK(std::abs(index.unsigned_distance({0, 0, 2}) - 1.0) < 2e-3);

    SUBCASE("1-Lipschitz") {
        std::mt19937_64 rng(41);
        for (int i = 0; i < 500; ++i) {
            Vec3 p = oracle::random_point(rng, sphere.bounds().inflated(1.0));
            Vec3 q = oracle::random_point(rng, sphere.bounds().inflated(1.0));
            CHECK(std::abs(index.unsigned_distance(p) - index.unsigned_distance(q)) <= (p - q).norm() + 1e-12);
        }
    }
}

TEST_CASE("normals") {
    TriMesh tri;
    tri.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    tri.faces = {{0, 1, 2}};
    auto n = compute_normals(tri);
    CHECK(n.face[0].isApprox(Vec3(0, 0, 1)));
    CHECK(compute_normals(flipped(tri)).face[0].isApprox(Vec3(0, 0, -1)));

    SUBCASE("icosphere vertex normals are radial") {
        const TriMesh sphere = make_icosphere(1.0, 4);
        auto sn = compute_normals(sphere);
        for (std::size_t i = 0; i < sphere.vertices.size(); ++i) {
            CHECK((sn.vertex[i] - sphere.vertices[i].normalized()).norm() < 1e-2);
            CHECK(sn.vertex[i].norm() == doctest::Approx(1.0));
        }
    }
    SUBCASE("zero-area face is named") {
        TriMesh bad;
        bad.vertices = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
        bad.faces = {{0, 1, 2}};
        try {
            compute_normals(bad);
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::DegenerateGeometry);
            CHECK(std::string(e.what()).find("face 0") != std::string::npos);
        }
    }
}

TEST_CASE("connected_components") {
    SUBCASE("two disjoint triangles") {
        TriMesh m;
        m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {5, 0, 0}, {6, 0, 0}, {5, 1, 0}};
        m.faces = {{0, 1, 2}, {3, 4, 5}};
        std::vector<std::uint32_t> all = {0, 1, 2, 3, 4, 5};
        auto comps = connected_components(m, all);
        REQUIRE(comps.size() == 2);
        CHECK(comps[0].size() == 3);
        CHECK(comps[1].size() == 3);
    }
    SUBCASE("empty set") {
        CHECK(connected_components(make_unit_cube(), {}).empty());
    }
    SUBCASE("random grid subset matches BFS flood fill") {
        const TriMesh grid = make_grid(30, 30, 1.0);
        const auto adj = vertex_adjacency(grid);
        std::mt19937_64 rng(43);
        std::bernoulli_distribution pick(0.45);
        std::vector<std::uint32_t> subset;
        std::vector<bool> in(grid.vertices.size(), false);
        for (std::uint32_t v = 0; v < grid.vertices.size(); ++v) {
            if (pick(rng)) {
                subset.push_back(v);
                in[v] = true;
            }
        }
        // Flood fill oracle.
        std::vector<int> comp(grid.vertices.size(), -1);
        std::vector<std::size_t> sizes;
        for (auto s : subset) {
            if (comp[s] >= 0) continue;
            int id = static_cast<int>(sizes.size());
            sizes.push_back(0);
            std::vector<std::uint32_t> queue{s};
            comp[s] = id;
            for (std::size_t qi = 0; qi < queue.size(); ++qi) {
                ++sizes[id];
                for (auto nb : adj[queue[qi]]) {
                    if (in[nb] && comp[nb] < 0) {
                        comp[nb] = id;
                        queue.push_back(nb);
                    }
                }
            }
        }
        auto comps = connected_components(grid, subset);
        REQUIRE(comps.size() == sizes.size());
        for (std::size_t c = 0; c + 1 < comps.size(); ++c) CHECK(comps[c].size() >= comps[c + 1].size());
        for (const auto& c : comps) {
            const int id = comp[c.front()];
            CHECK(sizes[id] == c.size());
            for (auto v : c) CHECK(comp[v] == id);
        }
    }
}

TEST_CASE("mesh_io") {
    const fs::path dir = fs::temp_directory_path() / "layered_test_mesh_io";
    fs::create_directories(dir);

    SUBCASE("cube round trip through every format") {
        const TriMesh cube = make_unit_cube();
        for (const char* name : {"cube.obj", "cube.ply"}) {
            save_mesh(dir / name, cube);
            TriMesh back = load_mesh(dir / name);
            CHECK(back.faces == cube.faces);
            REQUIRE(back.vertices.size() == cube.vertices.size());
            for (std::size_t i = 0; i < cube.vertices.size(); ++i) {
                CHECK((back.vertices[i] - cube.vertices[i]).norm() < 1e-6);
            }
        }
        save_mesh(dir / "ascii.ply", cube, PlyEncoding::Ascii);
        CHECK(load_mesh(dir / "ascii.ply").faces == cube.faces);
    }
    SUBCASE("labels survive round trips") {
        TriMesh m = oracle::bumpy_sphere(2, 0.5, 0.1, 3);
        std::vector<int> labels(m.vertices.size());
        for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 4);
        m.labels = labels;
        for (const char* name : {"lab.obj", "lab.ply"}) {
            save_mesh(dir / name, m);
            TriMesh back = load_mesh(dir / name);
            REQUIRE(back.labels.has_value());
            CHECK(*back.labels == labels);
            for (std::size_t i = 0; i < m.vertices.size(); ++i) CHECK((back.vertices[i] - m.vertices[i]).norm() < 1e-6);
        }
        save_mesh(dir / "lab_ascii.ply", m, PlyEncoding::Ascii);
        CHECK(*load_mesh(dir / "lab_ascii.ply").labels == labels);
    }
    SUBCASE("out-of-range face index is a format error with a line number") {
        {
            std::ofstream out(dir / "bad.obj");
            out << "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n";
        }
        try {
            load_mesh(dir / "bad.obj");
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Format);
            CHECK(std::string(e.what()).find(":4:") != std::string::npos);
        }
        {
            std::ofstream out(dir / "bad.ply");
            out << "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\n"
                   "element face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0\n1 0 0\n0 1 0\n3 0 1 5\n";
        }
        try {
            load_mesh(dir / "bad.ply");
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Format);
            CHECK(std::string(e.what()).find(":13:") != std::string::npos);
        }
    }
    SUBCASE("unsupported extension is a usage error") {
        try {
            load_mesh(dir / "mesh.stl");
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Usage);
        }
    }
    SUBCASE("quads and negative indices in OBJ") {
        {
            std::ofstream out(dir / "quad.obj");
            out << "# quad\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf -4//1 -3//1 -2//1 -1//1\n";
        }
        TriMesh q = load_mesh(dir / "quad.obj");
        CHECK(q.faces.size() == 2);
        CHECK(q.faces[1] == Face{0, 2, 3});
    }
    fs::remove_all(dir);
}
