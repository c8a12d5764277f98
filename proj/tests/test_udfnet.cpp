// Copyright 2026 The layered-garments Authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "layered/error.hpp"
#include "layered/layering.hpp"
#include "layered/parallel.hpp"
#include "layered/synthgen.hpp"
#include "layered/udfnet.hpp"
#include "oracles.hpp"

using namespace layered;

namespace {

std::vector<std::uint32_t> all_vertices(const TriMesh& m) {
    std::vector<std::uint32_t> out(m.vertices.size());
    for (std::uint32_t i = 0; i < out.size(); ++i) out[i] = i;
    return out;
}

MlpUdf small_model(std::uint64_t seed, double delta = 0.5) {
    static constexpr int hidden[] = {12, 10};
    MlpUdf m = MlpUdf::create(2, hidden, delta, seed);
    // A zero output layer would hide every hidden gradient.
    std::mt19937_64 rng(seed + 100);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    for (Eigen::Index i = 0; i < m.weights.back().size(); ++i) m.weights.back().data()[i] = u(rng);
    m.biases.back()(0) = 0.2;
    return m;
}

// Every parameter as one flat list of references, layer by layer.
std::vector<double*> parameters(MlpUdf& m) {
    std::vector<double*> out;
    for (std::size_t l = 0; l < m.layer_count(); ++l) {
        for (Eigen::Index i = 0; i < m.weights[l].size(); ++i) out.push_back(m.weights[l].data() + i);
        for (Eigen::Index i = 0; i < m.biases[l].size(); ++i) out.push_back(m.biases[l].data() + i);
    }
    return out;
}

std::vector<double> flat(const Gradients& g) {
    std::vector<double> out;
    for (std::size_t l = 0; l < g.weights.size(); ++l) {
        out.insert(out.end(), g.weights[l].data(), g.weights[l].data() + g.weights[l].size());
        out.insert(out.end(), g.biases[l].data(), g.biases[l].data() + g.biases[l].size());
    }
    return out;
}

}  // namespace

TEST_CASE("positional_encode") {
    auto e = positional_encode(Vec3::Zero(), 1);
    REQUIRE(e.size() == 9);
    const double expected[] = {0, 0, 0, 0, 0, 0, 1, 1, 1};
    for (int i = 0; i < 9; ++i) CHECK(e(i) == expected[i]);
    auto raw = positional_encode(Vec3(0.1, -2, 3), 0);
    CHECK(raw.size() == 3);
    CHECK(raw(1) == -2.0);
    CHECK(positional_encode(Vec3(0.1, 0.2, 0.3), 4).size() == 27);
    auto p = positional_encode(Vec3(0.3, 0.0, 0.0), 3);
    CHECK(p(3 + 6 * 2) == doctest::Approx(std::sin(4 * 0.3)));
    CHECK(p(3 + 6 * 2 + 3) == doctest::Approx(std::cos(4 * 0.3)));
    CHECK_THROWS_AS(positional_encode(Vec3::Zero(), -1), Error);
}

TEST_CASE("MlpUdf: shapes and evaluation") {
    MlpUdf m = MlpUdf::create(4, 0.01, 3);
    CHECK(m.widths == std::vector<int>{27, 128, 256, 256, 128, 1});
    m.validate();
    for (std::size_t l = 0; l + 1 < m.layer_count(); ++l) CHECK(m.weights[l].cwiseAbs().maxCoeff() > 0.0);
    CHECK(m.weights.back().isZero());
    m.weights.back().setConstant(0.05);  // a non-trivial output
    m.biases.back()(0) = -0.3;
    std::mt19937_64 rng(1);
    std::vector<Vec3> pts;
    for (int i = 0; i < 300; ++i) pts.push_back(oracle::random_point(rng, Aabb{Vec3::Constant(-1), Vec3::Constant(1)}));
    auto batch = udf_eval_batch(m, pts);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const double single = udf_eval(m, pts[i]);
        CHECK(std::memcmp(&single, &batch[i], sizeof(double)) == 0);
        CHECK(single >= 0.0);
        CHECK(udf_eval(m, pts[i]) == single);
    }
    m.weights.back().setZero();
    m.biases.back().setZero();
    for (const auto& p : pts) CHECK(udf_eval(m, p) == 0.0);
    m.widths[0] = 5;
    CHECK_THROWS_AS(m.validate(), Error);
}

TEST_CASE("sample_training_points: categories and ground truth") {
    SUBCASE("plane patch") {
        TriMesh plane = make_grid(10, 10, 1.0);
        SampleSet s = sample_training_points(plane, all_vertices(plane), {500, 500, 500}, 0.01, 4);
        REQUIRE(s.size() == 1500);
        int checked = 0;
        for (std::size_t i = 0; i < s.size(); ++i) {
            CHECK(s.gt[i] >= 0.0);
            if (s.category[i] == SampleCategory::Surface) {
                CHECK(s.gt[i] == 0.0);
                CHECK(s.points[i].z() == 0.0);
            } else if (std::abs(s.points[i].x()) < 0.5 && std::abs(s.points[i].y()) < 0.5) {
                CHECK(s.gt[i] == doctest::Approx(std::abs(s.points[i].z())).epsilon(1e-12));
                ++checked;
            }
        }
        CHECK(checked > 100);
    }
    SUBCASE("synthetic shirt against brute force") {
        FixtureSpec spec = FixtureSpec::standard(0.0);
        spec.segments = 24;
        spec.rings = 30;
        TriMesh shirt = make_garment_layer(spec, 1);
        const auto garment = garment_set_from_labels(shirt);
        SampleSet s = sample_training_points(shirt, garment, {3000, 4000, 3000}, 0.01, 8);
        REQUIRE(s.size() == 10000);
        std::vector<bool> in_s(shirt.vertices.size(), false);
        for (auto v : garment) in_s[v] = true;
        TriMesh s_only = extract_submesh(shirt, in_s);
        int mismatches = 0;
        for (std::size_t i = 0; i < s.size(); ++i) {
            const double brute = oracle::closest_point(s_only, s.points[i]).distance;
            if (std::abs(brute - s.gt[i]) > 1e-9) ++mismatches;
            if (s.category[i] != SampleCategory::Surface) {
                // The kept candidate's closest face on the whole mesh is an S face.
                const auto hit = oracle::closest_point(shirt, s.points[i]);
                const Face& f = shirt.faces[hit.face];
                CHECK((in_s[f[0]] && in_s[f[1]] && in_s[f[2]]));
            }
        }
        CHECK(mismatches == 0);
    }
    SUBCASE("deterministic") {
        TriMesh sphere = make_icosphere(0.3, 2);
        auto a = sample_training_points(sphere, all_vertices(sphere), {100, 100, 100}, 0.01, 5);
        auto b = sample_training_points(sphere, all_vertices(sphere), {100, 100, 100}, 0.01, 5);
        CHECK(a.points == b.points);
        CHECK(a.gt == b.gt);
    }
    SUBCASE("errors") {
        TriMesh sphere = make_icosphere(0.3, 3);
        CHECK_THROWS_AS(sample_training_points(sphere, {}, {1, 1, 1}, 0.01, 1), Error);
        const Face f0 = sphere.faces[0];
        const std::uint32_t tiny[] = {f0[0], f0[1], f0[2]};
        try {
            sample_training_points(sphere, tiny, {10, 0, 2000}, 0.01, 1);
            FAIL("expected starvation");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::SamplingStarvation);
        }
    }
}

TEST_CASE("udf_loss: exact values") {
    MlpUdf m = small_model(2);
    std::mt19937_64 rng(6);
    std::vector<Vec3> pts;
    for (int i = 0; i < 40; ++i) pts.push_back(oracle::random_point(rng, Aabb{Vec3::Constant(-1), Vec3::Constant(1)}));

    SUBCASE("perfect predictions") {
        std::vector<double> gt;
        for (const auto& p : pts) gt.push_back(udf_raw(m, p));
        // Targets below the clamp for every sample.
        m.delta = 1e9;
        Gradients g;
        CHECK(udf_loss(m, pts, gt, &g) == 0.0);
        for (double x : flat(g)) CHECK(x == 0.0);
    }
    SUBCASE("both sides clamped") {
        m.weights.back().setZero();
        m.biases.back().setConstant(2.0);  // raw output 2 > delta everywhere
        std::vector<double> gt(pts.size(), 3.0);
        Gradients g;
        CHECK(udf_loss(m, pts, gt, &g) == 0.0);
        for (double x : flat(g)) CHECK(x == 0.0);
    }
    SUBCASE("order invariance") {
        std::vector<double> gt;
        for (std::size_t i = 0; i < pts.size(); ++i) gt.push_back(0.01 * static_cast<double>(i % 7));
        const double a = udf_loss(m, pts, gt);
        std::vector<Vec3> rp(pts.rbegin(), pts.rend());
        std::vector<double> rg(gt.rbegin(), gt.rend());
        CHECK(udf_loss(m, rp, rg) == doctest::Approx(a).epsilon(1e-13));
    }
    CHECK_THROWS_AS(udf_loss(m, {}, {}), Error);
}

TEST_CASE("udf_loss: gradients match central differences") {
    MlpUdf m = small_model(11, 0.4);
    std::mt19937_64 rng(12);
    std::vector<Vec3> pts;
    std::vector<double> gt;
    std::uniform_real_distribution<double> u(0.0, 0.6);
    for (int i = 0; i < 64; ++i) {
        pts.push_back(oracle::random_point(rng, Aabb{Vec3::Constant(-1), Vec3::Constant(1)}));
        gt.push_back(u(rng));
    }
    Gradients g;
    udf_loss(m, pts, gt, &g);
    const auto analytic = flat(g);
    auto params = parameters(m);
    REQUIRE(params.size() == analytic.size());
    // Slices: first-layer weights, a hidden bias block, the output layer.
    const std::size_t first = static_cast<std::size_t>(m.weights[0].size());
    const std::size_t slices[3][2] = {{0, 40}, {first, first + 12}, {params.size() - 11, params.size()}};
    const double h = 1e-4;
    auto central = [&](double* p, double step) {
        const double keep = *p;
        *p = keep + step;
        const double up = udf_loss(m, pts, gt);
        *p = keep - step;
        const double down = udf_loss(m, pts, gt);
        *p = keep;
        return (up - down) / (2 * step);
    };
    for (const auto& sl : slices) {
        double num2 = 0.0, diff2 = 0.0, ana2 = 0.0;
        int kinks = 0;
        for (std::size_t i = sl[0]; i < sl[1]; ++i) {
            const double numeric = central(params[i], h);
            // The loss is piecewise smooth; a step that crosses a ReLU or clamp
            // kink shows up as disagreement with a ten times smaller step.
            const double finer = central(params[i], h / 10);
            if (std::abs(numeric - finer) > 1e-6 * std::max(std::abs(finer), 1e-6)) {
                ++kinks;
                continue;
            }
            num2 += numeric * numeric;
            ana2 += analytic[i] * analytic[i];
            diff2 += (numeric - analytic[i]) * (numeric - analytic[i]);
        }
        const double rel = std::sqrt(diff2) / std::max(std::sqrt(std::max(num2, ana2)), 1e-300);
        CHECK(kinks <= 2);
        CHECK(ana2 > 0.0);
        CHECK(rel < 1e-4);
    }
}

TEST_CASE("train_udf") {
    TriMesh sphere = make_icosphere(0.3, 3);
    SampleSet samples = sample_training_points(sphere, all_vertices(sphere), {600, 600, 300}, 0.01, 1);
    TrainConfig cfg;
    cfg.batch_size = 128;
    cfg.iterations = 30;

    SUBCASE("zero iterations leave the model alone") {
        MlpUdf m = MlpUdf::create(4, 0.01, 7), before = m;
        cfg.iterations = 0;
        CHECK(train_udf(m, samples, cfg).empty());
        for (std::size_t l = 0; l < m.layer_count(); ++l) CHECK(m.weights[l] == before.weights[l]);
    }
    SUBCASE("bit-identical per seed and thread count") {
        const int threads = thread_count();
        MlpUdf a = MlpUdf::create(4, 0.01, 7), b = a;
        set_thread_count(1);
        auto ha = train_udf(a, samples, cfg);
        set_thread_count(3);
        auto hb = train_udf(b, samples, cfg);
        set_thread_count(threads);
        CHECK(ha == hb);
        for (std::size_t l = 0; l < a.layer_count(); ++l) CHECK(a.weights[l] == b.weights[l]);
    }
    SUBCASE("windowed loss does not increase") {
        MlpUdf m = MlpUdf::create(4, 0.01, 7);
        cfg.iterations = 600;
        auto h = train_udf(m, samples, cfg);
        std::vector<double> windows;
        for (std::size_t w = 0; w + 100 <= h.size(); w += 100) {
            double s = 0.0;
            for (std::size_t i = w; i < w + 100; ++i) s += h[i];
            windows.push_back(s / 100);
        }
        for (std::size_t i = 1; i < windows.size(); ++i) CHECK(windows[i] <= windows[i - 1]);
    }
    SUBCASE("non-finite loss is reported with its step") {
        MlpUdf m = MlpUdf::create(4, 0.01, 7);
        SampleSet bad = samples;
        for (auto& g : bad.gt) g = std::numeric_limits<double>::quiet_NaN();
        try {
            train_udf(m, bad, cfg);
            FAIL("expected divergence");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Divergence);
            CHECK(std::string(e.what()).find("step 0") != std::string::npos);
        }
    }
    SUBCASE("invalid config") {
        MlpUdf m = MlpUdf::create(4, 0.01, 7);
        cfg.learning_rate = 0.0;
        CHECK_THROWS_AS(train_udf(m, samples, cfg), Error);
        cfg.learning_rate = 1e-4;
        cfg.batch_size = 0;
        CHECK_THROWS_AS(train_udf(m, samples, cfg), Error);
    }
}

TEST_CASE("checkpoint and loss history files") {
    auto dir = std::filesystem::temp_directory_path() / "layered_test_udfnet";
    std::filesystem::create_directories(dir);
    MlpUdf m = MlpUdf::create(4, 0.02, 9);
    save_checkpoint(dir / "m.ckpt", m);
    MlpUdf back = load_checkpoint(dir / "m.ckpt");
    CHECK(back.widths == m.widths);
    CHECK(back.pe_count == 4);
    CHECK(back.delta == 0.02);
    for (std::size_t l = 0; l < m.layer_count(); ++l) {
        CHECK(back.weights[l] == m.weights[l].cast<float>().cast<double>());
        CHECK(back.biases[l] == m.biases[l].cast<float>().cast<double>());
    }
    // A reloaded model saves to the identical bytes.
    save_checkpoint(dir / "m2.ckpt", back);
    std::ifstream a(dir / "m.ckpt", std::ios::binary), b(dir / "m2.ckpt", std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
    CHECK(sa == sb);
    {
        std::ofstream bad(dir / "bad.ckpt", std::ios::binary);
        bad << "LUDF";
    }
    CHECK_THROWS_AS(load_checkpoint(dir / "bad.ckpt"), Error);
    const double losses[] = {0.5, 0.25};
    save_loss_history(dir / "loss.csv", losses);
    std::ifstream csv(dir / "loss.csv");
    std::string header, row;
    std::getline(csv, header);
    std::getline(csv, row);
    CHECK(header == "step,loss");
    CHECK(row == "0,0.5");
}
