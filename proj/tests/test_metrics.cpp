// Copyright 2026 The layered-garments Authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>

#include "json.hpp"
#include "layered/error.hpp"
#include "layered/metrics.hpp"
#include "layered/parallel.hpp"
#include "oracles.hpp"

using namespace layered;

namespace {

// Independent area-uniform sampler and brute-force distances.
double oracle_directed(const TriMesh& from, const TriMesh& to, std::size_t n, std::uint64_t seed) {
    std::vector<double> areas;
    for (std::size_t f = 0; f < from.faces.size(); ++f) areas.push_back(from.face_area(f));
    std::mt19937_64 rng(seed);
    std::discrete_distribution<std::size_t> pick(areas.begin(), areas.end());
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Vec3> pts(n);
    for (auto& p : pts) {
        const Face& t = from.faces[pick(rng)];
        double a = u(rng), b = u(rng);
        if (a + b > 1) {
            a = 1 - a;
            b = 1 - b;
        }
        p = from.vertices[t[0]] + a * (from.vertices[t[1]] - from.vertices[t[0]]) + b * (from.vertices[t[2]] - from.vertices[t[0]]);
    }
    std::vector<double> d(n);
    parallel_for(n, [&](std::size_t i) { d[i] = oracle::closest_point(to, pts[i]).distance; });
    double s = 0.0;
    for (double x : d) s += x;
    return s / static_cast<double>(n);
}

TriMesh rotated(const TriMesh& m, double angle, const Vec3& axis) {
    Mat4 t = Mat4::Identity();
    t.topLeftCorner<3, 3>() = Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
    return transformed(m, t);
}

std::vector<const TriMesh*> ptrs(std::initializer_list<const TriMesh*> l) { return l; }

}  // namespace

TEST_CASE("sample_surface") {
    TriMesh m = make_grid(4, 4, 1.0);
    m.vertices.push_back(Vec3(5, 5, 5));
    m.faces.push_back(Face{0, 1, static_cast<std::uint32_t>(m.vertices.size() - 1)});
    m.faces.push_back(Face{0, 0 + 1, 0 + 2});  // collinear: zero area
    const auto s = sample_surface(m, 5000, 3);
    CHECK(s.points.size() == 5000);
    for (const auto& n : s.normals) CHECK(n.norm() == doctest::Approx(1.0));
    TriMesh flat;
    flat.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0)};
    flat.faces = {Face{0, 1, 2}};
    CHECK_THROWS_AS(sample_surface(flat, 10, 1), Error);
}

TEST_CASE("chamfer_distance") {
    const TriMesh sphere = make_icosphere(0.3, 3);
    CHECK(chamfer_distance(sphere, sphere, 20000, 1) < 1e-6);

    const TriMesh a = make_grid(8, 8, 1.0);
    TriMesh b = a;
    for (auto& v : b.vertices) v.z() += 0.01;
    CHECK(chamfer_distance(a, b, 20000, 2) == doctest::Approx(10.0).epsilon(0.02));

    const TriMesh bumpy = oracle::bumpy_sphere(2, 0.31, 0.005, 7);
    const TriMesh coarse = make_icosphere(0.3, 2);
    const double cd = chamfer_distance(bumpy, coarse, 10000, 5);
    CHECK(cd == chamfer_distance(coarse, bumpy, 10000, 5));
    const double dense = 1000.0 * (oracle_directed(bumpy, coarse, 100000, 11) + oracle_directed(coarse, bumpy, 100000, 12)) / 2.0;
    CHECK(cd == doctest::Approx(dense).epsilon(0.01));

    SUBCASE("deterministic across thread counts") {
        const int before = thread_count();
        set_thread_count(1);
        const double one = chamfer_distance(bumpy, coarse, 5000, 9);
        set_thread_count(3);
        const double three = chamfer_distance(bumpy, coarse, 5000, 9);
        set_thread_count(before);
        CHECK(one == three);
    }
    CHECK_THROWS_AS(chamfer_distance(TriMesh{}, sphere, 10, 1), Error);
    CHECK_THROWS_AS(chamfer_distance(sphere, sphere, 0, 1), Error);
}

TEST_CASE("normal_consistency") {
    const TriMesh sphere = make_icosphere(0.3, 3);
    CHECK(normal_consistency(sphere, sphere, 5000, 1) == doctest::Approx(1.0).epsilon(1e-12));
    const TriMesh plane = make_grid(6, 6, 1.0);
    CHECK(normal_consistency(plane, flipped(plane), 5000, 1) == doctest::Approx(1.0).epsilon(1e-12));
    const TriMesh fine = make_icosphere(0.3, 5);
    const double nc = normal_consistency(fine, rotated(fine, 5.0 * M_PI / 180.0, Vec3(0.3, 1, 0.2)), 20000, 4);
    CHECK(nc <= 1.0);
    CHECK(nc > 1.0 - 1e-3);
    // A plane against a perpendicular plane.
    const TriMesh wall = rotated(plane, M_PI / 2, Vec3::UnitX());
    CHECK(normal_consistency(plane, wall, 2000, 1) < 1e-9);
}

TEST_CASE("intersection_ratio") {
    const TriMesh body = make_icosphere(0.3, 3);
    SUBCASE("outer garment outside everything") {
        const TriMesh outer = make_icosphere(0.33, 3);
        const auto ir = intersection_ratio(outer, ptrs({&body}), 256);
        CHECK(ir.percent == 0.0);
        CHECK(ir.visible_alone > 0);
        CHECK(ir.visible_alone == ir.visible_in_scene);
    }
    SUBCASE("outer quad hidden from both views") {
        const TriMesh outer = make_quad(Vec3::Zero(), 0.2, 0.2);
        const TriMesh front = make_quad(Vec3(0, 0, 0.1), 0.5, 0.5), back = make_quad(Vec3(0, 0, -0.1), 0.5, 0.5);
        const auto ir = intersection_ratio(outer, ptrs({&front, &back}), 128);
        CHECK(ir.percent == 100.0);
        CHECK(ir.visible_in_scene == 0);
    }
    SUBCASE("exact ties go to the outer garment") {
        const auto ir = intersection_ratio(body, ptrs({&body}), 128);
        CHECK(ir.percent == 0.0);
    }
    SUBCASE("monotone in the inner stack and rigid invariant") {
        TriMesh outer = oracle::bumpy_sphere(3, 0.31, 0.05, 3);
        const TriMesh mid = make_icosphere(0.305, 3, Vec3(0.02, 0, 0));
        const auto views = ir_cameras(ptrs({&outer, &body, &mid}), 256);
        const auto one = intersection_ratio(outer, ptrs({&body}), views);
        const auto two = intersection_ratio(outer, ptrs({&body, &mid}), views);
        CHECK(one.percent > 0.0);
        CHECK(two.percent >= one.percent);
        CHECK(two.visible_alone == one.visible_alone);

        Mat4 g = Mat4::Identity();
        g.topLeftCorner<3, 3>() = Eigen::AngleAxisd(0.8, Vec3(1, 2, 3).normalized()).toRotationMatrix();
        g.topRightCorner<3, 1>() = Vec3(0.4, -1.0, 2.5);
        std::vector<Camera> moved = views;
        for (auto& c : moved) c.camera_to_world = g * c.camera_to_world;
        const TriMesh o2 = transformed(outer, g), b2 = transformed(body, g), m2 = transformed(mid, g);
        const auto t = intersection_ratio(o2, ptrs({&b2, &m2}), moved);
        // Rasterization sees the same scene up to rounding at pixel centers.
        CHECK(std::abs(t.percent - two.percent) < 0.05);
    }
    SUBCASE("no visible outer pixels is undefined") {
        const TriMesh outer = make_icosphere(0.1, 1, Vec3(50, 0, 0));
        Camera cam = Camera::look_at(Projection::Orthographic, Vec3(0, 0, 5), Vec3::Zero(), Vec3::UnitY(), 32, 32);
        try {
            intersection_ratio(outer, ptrs({&body}), std::vector<Camera>{cam});
            FAIL("expected an undefined metric");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::UndefinedMetric);
        }
    }
}

TEST_CASE("evaluate_layers and the JSON report") {
    const TriMesh body = make_icosphere(0.3, 3);
    const TriMesh l1 = make_icosphere(0.31, 3), l2 = make_icosphere(0.32, 3), ref = make_icosphere(0.321, 3);
    const LayerInput layers[] = {{"inner", &l1, nullptr}, {"outer", &l2, &ref}};
    MetricConfig cfg;
    cfg.samples = 2000;
    cfg.resolution = 128;
    const MetricReport r = evaluate_layers(body, layers, cfg);
    REQUIRE(r.layers.size() == 2);
    CHECK_FALSE(r.layers[0].chamfer_mm);
    CHECK(*r.layers[1].chamfer_mm == doctest::Approx(1.0).epsilon(0.05));
    CHECK(*r.chamfer_mm == *r.layers[1].chamfer_mm);
    CHECK(*r.intersection_ratio_percent == 0.0);
    const auto j = nlohmann::json::parse(metric_report_json(r));
    CHECK(j["layers"][1]["name"] == "outer");
    CHECK(j["layers"][0]["chamfer_mm"].is_null());
    CHECK(j["samples"] == 2000);
    CHECK(j["seed"] == 1);
    CHECK(j["intersection_ratio_percent"] == 0.0);
    cfg.samples = 0;
    CHECK_THROWS_AS(evaluate_layers(body, layers, cfg), Error);
}
