// Copyright 2026 The layered-garments Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Exit codes: 0 ok, 1 invalid manifest or usage,
// 2 stage failure, 3 I/O failure.
#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "layered/error.hpp"
#include "layered/parallel.hpp"
#include "layered/pipeline.hpp"

using namespace layered;

namespace {

enum Exit : int { kOk = 0, kInvalid = 1, kStageFailed = 2, kIoFailed = 3 };

int report_issues(const ManifestCheck& check) {
    for (const auto& i : check.issues) std::cerr << (i.location.empty() ? "(manifest)" : i.location) << ": " << i.message << '\n';
    return check.ok() ? kOk : kInvalid;
}

// Validates and loads, or returns an exit code.
std::optional<Manifest> load_or_report(const std::string& path, int& code) {
    if (!std::ifstream(path)) {
        std::cerr << "cannot read " << path << '\n';
        code = kIoFailed;
        return std::nullopt;
    }
    ManifestCheck check = validate_manifest(path);
    code = report_issues(check);
    return std::move(check.manifest);
}

int run(const std::string& manifest_path, const RunOptions& options) {
    int code = kOk;
    auto manifest = load_or_report(manifest_path, code);
    if (!manifest) return code;
    try {
        const RunRecord record = run_pipeline(*manifest, options);
        for (const auto& w : record.warnings) std::cerr << "warning: " << w << '\n';
        for (const auto& s : record.stages) std::cout << s.name << ": " << s.seconds << " s\n";
        return kOk;
    } catch (const StageError& e) {
        std::cerr << e.what() << '\n';
        return e.kind() == ErrorKind::Io ? kIoFailed : kStageFailed;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Layered garment reconstruction from per-layer clothed meshes", "layered"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));

    int threads = 0;
    app.add_option("--threads", threads, "Worker threads (default: LAYERED_THREADS or all cores)")->check(CLI::NonNegativeNumber);

    std::string manifest;
    std::string stages, out;
    std::uint64_t seed = 0;

    auto* validate = app.add_subcommand("validate", "Check a manifest and every file it references");
    validate->add_option("--manifest", manifest, "Manifest JSON")->required();

    auto* runc = app.add_subcommand("run", "Run a range of pipeline stages");
    runc->add_option("--manifest", manifest, "Manifest JSON")->required();
    runc->add_option("--stages", stages, "Stage range A..B (labels, canonicalize, penetration, udf, extract, metrics or 1-6)");
    auto* seed_opt = runc->add_option("--seed", seed, "Override the master seed");
    runc->add_option("--out", out, "Override the output directory");

    auto* metrics = app.add_subcommand("metrics", "Evaluate extracted garments and print the report");
    metrics->add_option("--manifest", manifest, "Manifest JSON")->required();
    auto* metrics_seed = metrics->add_option("--seed", seed, "Override the sampling seed");
    metrics->add_option("--out", out, "Output directory holding the garments");

    double penetration = 0.1, pose = 0.3;
    bool masks = false;
    int segments = 0, rings = 0;
    auto* synth = app.add_subcommand("synth", "Write a synthetic three-layer fixture and its manifest");
    synth->add_option("--out", out, "Fixture directory")->required();
    auto* synth_seed = synth->add_option("--seed", seed, "Fixture seed");
    synth->add_option("--penetration", penetration, "Fraction of each garment region pushed under the layer below")
        ->check(CLI::Range(0.0, 1.0));
    synth->add_option("--pose", pose, "Pose perturbation per joint, radians")->check(CLI::NonNegativeNumber);
    synth->add_flag("--masks", masks, "Label layers by voting over rendered masks");
    synth->add_option("--segments", segments, "Vertices per ring (default 128)")->check(CLI::PositiveNumber);
    synth->add_option("--rings", rings, "Rings between the poles (default 156)")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);
    if (threads > 0) set_thread_count(threads);

    try {
        if (*validate) {
            if (!std::ifstream(manifest)) {
                std::cerr << "cannot read " << manifest << '\n';
                return kIoFailed;
            }
            const int code = report_issues(validate_manifest(manifest));
            if (code == kOk) std::cout << "ok\n";
            return code;
        }
        if (*runc || *metrics) {
            RunOptions options;
            options.stages = *metrics ? StageRange{Stage::Metrics, Stage::Metrics} : StageRange::parse(stages);
            if (seed_opt->count() || metrics_seed->count()) options.seed = seed;
            if (!out.empty()) options.output = out;
            const int code = run(manifest, options);
            if (code == kOk && *metrics) {
                const auto dir = options.output ? *options.output : load_manifest(manifest).output;
                std::cout << std::ifstream(dir / artifacts::metrics()).rdbuf();
            }
            return code;
        }
        if (*synth) {
            FixtureSpec spec = FixtureSpec::standard(penetration);
            if (synth_seed->count()) spec.seed = seed;
            if (segments) spec.segments = segments;
            if (rings) spec.rings = rings;
            SynthOptions options;
            options.pose_magnitude = pose;
            options.masks = masks;
            write_synthetic_fixture(spec, options, out);
            std::cout << (std::filesystem::path(out) / "manifest.json").string() << '\n';
            return kOk;
        }
    } catch (const Error& e) {
        std::cerr << e.what() << '\n';
        if (e.kind() == ErrorKind::Io) return kIoFailed;
        return e.kind() == ErrorKind::Usage || e.kind() == ErrorKind::InvalidInput ? kInvalid : kStageFailed;
    } catch (const std::exception& e) {
        std::cerr << e.what() << '\n';
        return kIoFailed;
    }
    return kOk;
}
