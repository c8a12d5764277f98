// Copyright 2026 The layered-garments Authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <set>

#include <sys/wait.h>

#include "json.hpp"
#include "layered/error.hpp"
#include "layered/mesh_io.hpp"
#include "layered/pipeline.hpp"

using namespace layered;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("layered_pipeline_" + name);
    fs::remove_all(p);
    return p;
}

// Small enough for a unit test; every stage still does real work.
SynthOptions tiny_options() {
    SynthOptions o;
    o.params.pe_count = 2;
    o.params.hidden = {16, 16};
    o.params.samples = {600, 600, 300};
    o.params.train.iterations = 40;
    o.params.train.batch_size = 256;
    o.params.train.learning_rate = 1e-3;
    o.params.grid_resolution = 32;
    o.params.tau = 0.006;
    o.params.metrics.samples = 1000;
    o.params.metrics.resolution = 96;
    return o;
}

FixtureSpec tiny_spec() {
    FixtureSpec s = FixtureSpec::standard(0.1);
    s.segments = 20;
    s.rings = 24;
    return s;
}

std::string bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    return {std::istreambuf_iterator<char>(in), {}};
}

json read_json(const fs::path& p) { return json::parse(bytes(p)); }

void write_json(const fs::path& p, const json& j) { std::ofstream(p) << j.dump(2); }

bool has_issue(const ManifestCheck& c, const std::string& location, const std::string& fragment) {
    for (const auto& i : c.issues) {
        if (i.location == location && i.message.find(fragment) != std::string::npos) return true;
    }
    return false;
}

}  // namespace

TEST_CASE("stage ranges") {
    CHECK(StageRange::parse("").first == Stage::Labels);
    CHECK(StageRange::parse("").last == Stage::Metrics);
    const auto r = StageRange::parse("canonicalize..penetration");
    CHECK(r.first == Stage::Canonicalize);
    CHECK(r.last == Stage::Penetration);
    CHECK(StageRange::parse("4").first == Stage::Udf);
    CHECK(StageRange::parse("4").last == Stage::Udf);
    CHECK(StageRange::parse("udf..").last == Stage::Metrics);
    CHECK(StageRange::parse("..2").first == Stage::Labels);
    CHECK(r.contains(Stage::Penetration));
    CHECK_FALSE(r.contains(Stage::Udf));
    for (const char* bad : {"bake", "5..2", "0", "7", "1...3"}) {
        try {
            StageRange::parse(bad);
            FAIL("accepted " << bad);
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Usage);
        }
    }
}

TEST_CASE("manifest validation") {
    const fs::path dir = scratch("validate");
    const Manifest written = write_synthetic_fixture(tiny_spec(), tiny_options(), dir);
    const fs::path path = dir / "manifest.json";

    SUBCASE("synthetic manifest is valid and round trips") {
        const ManifestCheck c = validate_manifest(path);
        for (const auto& i : c.issues) INFO(i.location << ": " << i.message);
        REQUIRE(c.ok());
        const Manifest& m = *c.manifest;
        REQUIRE(m.layers.size() == 3);
        CHECK(m.layers[2].name == "layer3");
        CHECK(fs::equivalent(m.body_mesh, written.body_mesh));
        CHECK(m.params.hidden == std::vector<int>{16, 16});
        CHECK(m.params.train.iterations == 40);
        CHECK(m.params.tau == 0.006);
        save_manifest(dir / "copy.json", m);
        CHECK(bytes(dir / "copy.json") == bytes(path));
    }
    SUBCASE("missing pose file gives one issue naming the layer") {
        fs::remove(written.layers[1].pose);
        const ManifestCheck c = validate_manifest(path);
        REQUIRE(c.issues.size() == 1);
        CHECK(c.issues[0].location == "layers[1].pose");
        CHECK(c.issues[0].message.find("not found") != std::string::npos);
        CHECK_FALSE(c.manifest);
        CHECK_THROWS_AS(load_manifest(path), Error);
    }
    SUBCASE("weights rows must match body vertices") {
        json j = read_json(path);
        j["body"]["weights"] = "other.weights";
        write_json(path, j);
        // Weights of a differently tessellated body.
        FixtureSpec coarse = tiny_spec();
        coarse.segments = 12;
        write_synthetic_fixture(coarse, tiny_options(), dir / "coarse");
        fs::copy_file(dir / "coarse" / "body.weights", dir / "other.weights");
        const ManifestCheck c = validate_manifest(path);
        CHECK(has_issue(c, "body.weights", "dimension mismatch"));
    }
    SUBCASE("every problem is collected") {
        json j = read_json(path);
        j["colour"] = 3;
        j["parameters"]["tau"] = -1.0;
        j["parameters"]["train"]["batch_size"] = "big";
        j["layers"][0]["garment_label"] = 9;
        j["layers"][2]["labels"] = {{"source", "paint"}};
        j.erase("output");
        write_json(path, j);
        const ManifestCheck c = validate_manifest(path);
        CHECK(has_issue(c, "colour", "unknown key"));
        CHECK(has_issue(c, "parameters.tau", "positive"));
        CHECK(has_issue(c, "parameters.train.batch_size", "wrong type"));
        CHECK(has_issue(c, "layers[0].garment_label", "does not occur"));
        CHECK(has_issue(c, "layers[2].labels.source", "masks"));
        CHECK(has_issue(c, "output", "missing"));
        CHECK(c.issues.size() == 6);
    }
    SUBCASE("unreadable manifests") {
        std::ofstream(path) << "{ not json";
        CHECK(validate_manifest(path).issues.size() == 1);
        CHECK(validate_manifest(dir / "absent.json").issues.size() == 1);
        write_json(path, json{{"version", 2}});
        CHECK(has_issue(validate_manifest(path), "version", "unsupported"));
    }
    fs::remove_all(dir);
}

TEST_CASE("stage gating, failures and the run record") {
    const fs::path dir = scratch("gating");
    const Manifest m = write_synthetic_fixture(tiny_spec(), tiny_options(), dir);

    SUBCASE("a stage without its inputs fails with its name") {
        RunOptions o;
        o.stages = StageRange::parse("penetration");
        try {
            run_pipeline(m, o);
            FAIL("expected a stage error");
        } catch (const StageError& e) {
            CHECK(e.stage() == Stage::Penetration);
            CHECK(e.kind() == ErrorKind::Io);
            CHECK(std::string(e.what()).find("stage penetration") != std::string::npos);
        }
        const json rec = read_json(m.output / artifacts::run_record());
        CHECK(rec["failure"].get<std::string>().find("penetration") != std::string::npos);
    }
    SUBCASE("labels..penetration writes no checkpoints") {
        RunOptions o;
        o.stages = StageRange::parse("labels..penetration");
        const RunRecord r = run_pipeline(m, o);
        CHECK(r.stages.size() == 3);
        CHECK(r.failure.empty());
        for (const auto& l : m.layers) {
            CHECK(fs::exists(m.output / artifacts::layered(l.name)));
            CHECK_FALSE(fs::exists(m.output / artifacts::checkpoint(l.name)));
        }
        CHECK_FALSE(fs::exists(m.output / "udf"));
        CHECK_FALSE(fs::exists(m.output / "garments"));
    }
    SUBCASE("a layer failing inside a stage is named") {
        run_pipeline(m, {StageRange::parse("labels..penetration"), {}, {}});
        fs::remove(m.output / artifacts::layered("layer2"));
        try {
            run_pipeline(m, {StageRange::parse("udf"), {}, {}});
            FAIL("expected a stage error");
        } catch (const StageError& e) {
            CHECK(e.stage() == Stage::Udf);
            CHECK(e.layer() == 2);
            // The first layer's checkpoint stays on disk.
            CHECK(fs::exists(m.output / artifacts::checkpoint("layer1")));
        }
    }
    fs::remove_all(dir);
}

TEST_CASE("resumed runs match uninterrupted runs") {
    const fs::path dir = scratch("resume");
    const Manifest m = write_synthetic_fixture(tiny_spec(), tiny_options(), dir);
    const fs::path whole = dir / "whole", split = dir / "split";

    const RunRecord full = run_pipeline(m, {StageRange{}, {}, whole});
    REQUIRE(full.stages.size() == 6);
    run_pipeline(m, {StageRange::parse("labels..penetration"), {}, split});
    run_pipeline(m, {StageRange::parse("udf..metrics"), {}, split});

    const json rec = read_json(split / artifacts::run_record());
    REQUIRE(rec["stages"].size() == 6);
    std::set<std::string> recorded;
    for (const auto& s : rec["stages"]) {
        for (const auto& o : s["outputs"]) recorded.insert(o.get<std::string>());
    }
    // Every artifact is in the record and identical between the two runs.
    std::size_t files = 0;
    for (const auto& e : fs::recursive_directory_iterator(split)) {
        if (!e.is_regular_file()) continue;
        const std::string relpath = fs::relative(e.path(), split).generic_string();
        if (relpath == artifacts::run_record().generic_string()) continue;
        ++files;
        CHECK_MESSAGE(recorded.count(relpath), relpath);
        CHECK_MESSAGE(bytes(e.path()) == bytes(whole / relpath), relpath);
    }
    CHECK(files == recorded.size());

    SUBCASE("re-running training gives the same checkpoint") {
        const std::string before = bytes(split / artifacts::checkpoint("layer3"));
        run_pipeline(m, {StageRange::parse("udf"), {}, split});
        CHECK(bytes(split / artifacts::checkpoint("layer3")) == before);
    }
    SUBCASE("a different seed changes the network") {
        run_pipeline(m, {StageRange::parse("udf"), 99, split});
        CHECK(bytes(split / artifacts::checkpoint("layer3")) != bytes(whole / artifacts::checkpoint("layer3")));
        CHECK(read_json(split / artifacts::run_record())["parameters"]["seed"] == 99);
    }
    fs::remove_all(dir);
}

TEST_CASE("mask-labelled fixture") {
    const fs::path dir = scratch("masks");
    SynthOptions o = tiny_options();
    o.masks = true;
    o.mask_resolution = 96;
    const Manifest m = write_synthetic_fixture(tiny_spec(), o, dir);
    REQUIRE(m.layers[0].labels_from_masks);
    CHECK(m.layers[0].views.size() == 60);
    const ManifestCheck c = validate_manifest(dir / "manifest.json");
    REQUIRE(c.ok());
    run_pipeline(*c.manifest, {StageRange::parse("labels"), {}, {}});
    for (std::size_t k = 0; k < m.layers.size(); ++k) {
        const auto truth = *load_mesh(m.layers[k].mesh).labels;
        const auto voted = load_labels(m.output / artifacts::labels(m.layers[k].name));
        REQUIRE(voted.size() == truth.size());
        std::size_t agree = 0;
        for (std::size_t i = 0; i < truth.size(); ++i) agree += truth[i] == voted[i];
        CHECK(static_cast<double>(agree) / truth.size() > 0.9);
    }
    fs::remove_all(dir);
}

#ifdef LAYERED_CLI_PATH
TEST_CASE("command-line exit codes") {
    const fs::path dir = scratch("cli");
    const std::string cli = LAYERED_CLI_PATH;
    auto status = [&](const std::string& args) {
        const int s = std::system((cli + " " + args + " >/dev/null 2>&1").c_str());
        return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
    };
    CHECK(status("synth --out " + dir.string() + " --segments 20 --rings 24") == 0);
    const std::string manifest = "--manifest " + (dir / "manifest.json").string();
    CHECK(status("validate " + manifest) == 0);
    CHECK(status("validate --manifest " + (dir / "absent.json").string()) == 3);
    CHECK(status("run " + manifest + " --stages bake") == 1);
    CHECK(status("run " + manifest + " --stages extract") == 3);  // no checkpoints yet
    CHECK(status("--threads 2 run " + manifest + " --stages labels..canonicalize") == 0);
    fs::remove(dir / "layer2_pose.json");
    CHECK(status("validate " + manifest) == 1);
    CHECK(status("frobnicate") != 0);
    fs::remove_all(dir);
}
#endif
