// Copyright 2026 The layered-garments Authors
// SPDX-License-Identifier: Apache-2.0
#include "layered/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <functional>
#include <map>
#include <set>

#include "json.hpp"
#include "layered/extraction.hpp"
#include "layered/labels.hpp"
#include "layered/layering.hpp"
#include "layered/mesh_io.hpp"
#include "layered/point_index.hpp"
#include "layered/skinning.hpp"

namespace layered {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---------------------------------------------------------------- stages

const char* stage_name(Stage stage) {
    switch (stage) {
        case Stage::Labels: return "labels";
        case Stage::Canonicalize: return "canonicalize";
        case Stage::Penetration: return "penetration";
        case Stage::Udf: return "udf";
        case Stage::Extract: return "extract";
        case Stage::Metrics: return "metrics";
    }
    return "unknown";
}

namespace {

Stage parse_stage(const std::string& text) {
    for (int i = 1; i <= kStageCount; ++i) {
        const auto s = static_cast<Stage>(i);
        if (text == stage_name(s) || text == std::to_string(i)) return s;
    }
    throw Error(ErrorKind::Usage, "unknown stage '" + text + "' (expected labels, canonicalize, penetration, udf, extract, metrics or 1-6)");
}

}  // namespace

StageRange StageRange::parse(const std::string& text) {
    StageRange r;
    if (text.empty()) return r;
    const auto dots = text.find("..");
    if (dots == std::string::npos) {
        r.first = r.last = parse_stage(text);
        return r;
    }
    const std::string a = text.substr(0, dots), b = text.substr(dots + 2);
    if (!a.empty()) r.first = parse_stage(a);
    if (!b.empty()) r.last = parse_stage(b);
    if (static_cast<int>(r.first) > static_cast<int>(r.last)) throw Error(ErrorKind::Usage, "stage range '" + text + "' is reversed");
    return r;
}

StageError::StageError(Stage stage, int layer, const Error& cause)
    : Error(cause.kind(), std::string("stage ") + stage_name(stage) + (layer > 0 ? ", layer " + std::to_string(layer) : std::string()) +
                              ": " + cause.what()),
      stage_(stage),
      layer_(layer) {}

PipelineParameters PipelineParameters::fixture_scale() {
    PipelineParameters p;
    p.samples = {10000, 10000, 5000};
    p.train.batch_size = 1024;
    p.train.iterations = 1500;
    p.grid_resolution = 128;
    p.metrics.samples = 20000;
    p.metrics.resolution = 512;
    return p;
}

namespace artifacts {
fs::path labels(const std::string& layer) { return fs::path("labels") / (layer + ".labels"); }
fs::path canonical_body() { return fs::path("canonical") / "body.ply"; }
fs::path canonical(const std::string& layer) { return fs::path("canonical") / (layer + ".ply"); }
fs::path layered(const std::string& layer) { return fs::path("layered") / (layer + ".ply"); }
fs::path checkpoint(const std::string& layer) { return fs::path("udf") / (layer + ".ckpt"); }
fs::path loss_history(const std::string& layer) { return fs::path("udf") / (layer + "_loss.csv"); }
fs::path garment(const std::string& layer) { return fs::path("garments") / (layer + ".ply"); }
fs::path metrics() { return "metrics.json"; }
fs::path run_record() { return "run_record.json"; }
}  // namespace artifacts

// ---------------------------------------------------------------- parameters <-> JSON

namespace {

json params_to_json(const PipelineParameters& p) {
    return {{"seed", p.seed},
            {"epsilon", p.epsilon},
            {"visibility_tolerance", p.visibility_tolerance},
            {"smoothing_iterations", p.smoothing_iterations},
            {"pe_count", p.pe_count},
            {"hidden", p.hidden},
            {"delta", p.delta},
            {"sampling", {{"surface", p.samples.surface}, {"near", p.samples.near}, {"box", p.samples.box}, {"sigma", p.sigma}}},
            {"train",
             {{"learning_rate", p.train.learning_rate},
              {"beta1", p.train.beta1},
              {"beta2", p.train.beta2},
              {"adam_epsilon", p.train.adam_epsilon},
              {"batch_size", p.train.batch_size},
              {"iterations", p.train.iterations}}},
            {"grid_resolution", p.grid_resolution},
            {"tau", p.tau},
            {"xi", p.xi},
            {"view_dir", {p.view_dir.x(), p.view_dir.y(), p.view_dir.z()}},
            {"metrics", {{"samples", p.metrics.samples}, {"resolution", p.metrics.resolution}}}};
}

// Reads JSON objects field by field, recording issues instead of throwing.
class Reader {
public:
    explicit Reader(std::vector<ManifestIssue>& issues) : issues_(issues) {}

    void issue(const std::string& where, const std::string& what) { issues_.push_back({where, what}); }

    // Flags keys outside `known`.
    void only(const json& obj, const std::string& where, std::initializer_list<const char*> known) {
        if (!obj.is_object()) return;
        std::set<std::string> k(known.begin(), known.end());
        for (auto it = obj.begin(); it != obj.end(); ++it) {
            if (!k.count(it.key())) issue(join(where, it.key()), "unknown key");
        }
    }

    template <class T>
    void optional(const json& obj, const std::string& where, const char* key, T& out) {
        if (!obj.is_object() || !obj.contains(key)) return;
        try {
            out = obj.at(key).get<T>();
        } catch (const json::exception&) {
            issue(join(where, key), "wrong type");
        }
    }

    std::optional<std::string> string(const json& obj, const std::string& where, const char* key, bool required) {
        if (!obj.is_object() || !obj.contains(key)) {
            if (required) issue(join(where, key), "missing");
            return std::nullopt;
        }
        if (!obj.at(key).is_string()) {
            issue(join(where, key), "expected a string");
            return std::nullopt;
        }
        return obj.at(key).get<std::string>();
    }

    static std::string join(const std::string& where, const std::string& key) { return where.empty() ? key : where + "." + key; }

private:
    std::vector<ManifestIssue>& issues_;
};

PipelineParameters read_params(const json& j, Reader& r) {
    PipelineParameters p;
    if (j.is_null()) return p;
    const std::string w = "parameters";
    if (!j.is_object()) {
        r.issue(w, "expected an object");
        return p;
    }
    r.only(j, w, {"seed", "epsilon", "visibility_tolerance", "smoothing_iterations", "pe_count", "hidden", "delta", "sampling", "train",
                  "grid_resolution", "tau", "xi", "view_dir", "metrics"});
    r.optional(j, w, "seed", p.seed);
    r.optional(j, w, "epsilon", p.epsilon);
    r.optional(j, w, "visibility_tolerance", p.visibility_tolerance);
    r.optional(j, w, "smoothing_iterations", p.smoothing_iterations);
    r.optional(j, w, "pe_count", p.pe_count);
    r.optional(j, w, "hidden", p.hidden);
    r.optional(j, w, "delta", p.delta);
    r.optional(j, w, "grid_resolution", p.grid_resolution);
    r.optional(j, w, "tau", p.tau);
    r.optional(j, w, "xi", p.xi);
    if (j.contains("view_dir")) {
        std::vector<double> d;
        r.optional(j, w, "view_dir", d);
        if (d.size() == 3) p.view_dir = Vec3(d[0], d[1], d[2]);
        else r.issue("parameters.view_dir", "expected [x, y, z]");
    }
    if (j.contains("sampling")) {
        const json& s = j["sampling"];
        r.only(s, "parameters.sampling", {"surface", "near", "box", "sigma"});
        r.optional(s, "parameters.sampling", "surface", p.samples.surface);
        r.optional(s, "parameters.sampling", "near", p.samples.near);
        r.optional(s, "parameters.sampling", "box", p.samples.box);
        r.optional(s, "parameters.sampling", "sigma", p.sigma);
    }
    if (j.contains("train")) {
        const json& t = j["train"];
        r.only(t, "parameters.train", {"learning_rate", "beta1", "beta2", "adam_epsilon", "batch_size", "iterations"});
        r.optional(t, "parameters.train", "learning_rate", p.train.learning_rate);
        r.optional(t, "parameters.train", "beta1", p.train.beta1);
        r.optional(t, "parameters.train", "beta2", p.train.beta2);
        r.optional(t, "parameters.train", "adam_epsilon", p.train.adam_epsilon);
        r.optional(t, "parameters.train", "batch_size", p.train.batch_size);
        r.optional(t, "parameters.train", "iterations", p.train.iterations);
    }
    if (j.contains("metrics")) {
        const json& m = j["metrics"];
        r.only(m, "parameters.metrics", {"samples", "resolution"});
        r.optional(m, "parameters.metrics", "samples", p.metrics.samples);
        r.optional(m, "parameters.metrics", "resolution", p.metrics.resolution);
    }
    auto check = [&](bool ok, const char* key, const char* what) {
        if (!ok) r.issue(std::string("parameters.") + key, what);
    };
    check(p.epsilon > 0.0, "epsilon", "must be positive");
    check(p.visibility_tolerance >= 0.0, "visibility_tolerance", "must be non-negative");
    check(p.smoothing_iterations >= 0, "smoothing_iterations", "must be non-negative");
    check(p.pe_count >= 0, "pe_count", "must be non-negative");
    check(!p.hidden.empty() && std::all_of(p.hidden.begin(), p.hidden.end(), [](int h) { return h > 0; }), "hidden",
          "needs at least one positive width");
    check(p.delta > 0.0, "delta", "must be positive");
    check(p.sigma >= 0.0, "sampling.sigma", "must be non-negative");
    check(p.samples.surface + p.samples.near + p.samples.box > 0, "sampling", "needs at least one sample");
    check(p.train.learning_rate > 0.0, "train.learning_rate", "must be positive");
    check(p.train.batch_size >= 1, "train.batch_size", "must be at least 1");
    check(p.grid_resolution >= 2, "grid_resolution", "must be at least 2");
    check(p.tau > 0.0, "tau", "must be positive");
    check(p.xi >= 0.0, "xi", "must be non-negative");
    check(std::abs(p.view_dir.norm() - 1.0) < 1e-6, "view_dir", "must be a unit vector");
    check(p.metrics.samples >= 1, "metrics.samples", "must be at least 1");
    check(p.metrics.resolution >= 1, "metrics.resolution", "must be at least 1");
    return p;
}

std::string rel(const fs::path& p, const fs::path& base) {
    const fs::path a = fs::absolute(p).lexically_normal();
    const fs::path r = a.lexically_relative(base);
    return (r.empty() || *r.begin() == "..") ? a.generic_string() : r.generic_string();
}

}  // namespace

// ---------------------------------------------------------------- manifest

ManifestCheck validate_manifest(const fs::path& path) {
    ManifestCheck check;
    auto& issues = check.issues;
    Reader r(issues);
    std::ifstream in(path);
    if (!in) {
        issues.push_back({"", "cannot open " + path.string()});
        return check;
    }
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        issues.push_back({"", std::string("not valid JSON: ") + e.what()});
        return check;
    }
    if (!j.is_object()) {
        issues.push_back({"", "top level must be an object"});
        return check;
    }
    const fs::path base = fs::absolute(path).parent_path();
    auto resolve = [&](const std::string& s) { return fs::path(s).is_absolute() ? fs::path(s) : (base / s).lexically_normal(); };

    r.only(j, "", {"version", "body", "canonical_pose", "layers", "parameters", "output"});
    if (!j.contains("version")) issues.push_back({"version", "missing"});
    else if (j["version"] != kManifestVersion) issues.push_back({"version", "unsupported (expected " + std::to_string(kManifestVersion) + ")"});

    Manifest m;
    m.params = read_params(j.value("parameters", json()), r);
    if (auto out = r.string(j, "", "output", true)) m.output = resolve(*out);

    // Loads a referenced file, turning any failure into an issue.
    auto attempt = [&](const std::string& where, const std::function<void()>& load) {
        try {
            load();
            return true;
        } catch (const Error& e) {
            issues.push_back({where, e.what()});
        } catch (const std::exception& e) {
            issues.push_back({where, e.what()});
        }
        return false;
    };
    auto existing = [&](const std::string& where, const fs::path& p) {
        if (fs::exists(p)) return true;
        issues.push_back({where, "file not found: " + p.string()});
        return false;
    };

    // Body.
    std::optional<TriMesh> body;
    std::optional<WeightField> weights;
    std::optional<std::size_t> joint_count;
    const json& jb = j.value("body", json());
    if (!jb.is_object()) {
        issues.push_back({"body", "missing or not an object"});
    } else {
        r.only(jb, "body", {"mesh", "weights", "joints"});
        if (auto s = r.string(jb, "body", "mesh", true)) {
            m.body_mesh = resolve(*s);
            if (existing("body.mesh", m.body_mesh)) attempt("body.mesh", [&] { body = load_mesh(m.body_mesh); });
        }
        if (auto s = r.string(jb, "body", "weights", true)) {
            m.body_weights = resolve(*s);
            if (existing("body.weights", m.body_weights)) attempt("body.weights", [&] { weights = load_weights(m.body_weights); });
        }
        if (weights) {
            joint_count = weights->joints();
            if (body && weights->rows() != body->vertices.size()) {
                issues.push_back({"body.weights", "dimension mismatch: " + std::to_string(weights->rows()) + " weight rows for " +
                                                      std::to_string(body->vertices.size()) + " body vertices"});
            }
        }
        if (auto s = r.string(jb, "body", "joints", false)) {
            m.body_joints = resolve(*s);
            std::vector<Vec3> joints;
            if (existing("body.joints", *m.body_joints) && attempt("body.joints", [&] { joints = load_joints(*m.body_joints); })) {
                if (joint_count && joints.size() != *joint_count) {
                    issues.push_back({"body.joints", "dimension mismatch: " + std::to_string(joints.size()) + " joints for " +
                                                         std::to_string(*joint_count) + " weight columns"});
                }
            }
        }
    }
    auto check_pose = [&](const std::string& where, const fs::path& p) {
        Pose pose;
        if (existing(where, p) && attempt(where, [&] { pose = load_pose(p); })) {
            if (joint_count && pose.joint_count() != *joint_count) {
                issues.push_back({where, "dimension mismatch: " + std::to_string(pose.joint_count()) + " bones for " +
                                             std::to_string(*joint_count) + " joints"});
            }
        }
    };
    if (auto s = r.string(j, "", "canonical_pose", false)) {
        m.canonical_pose = resolve(*s);
        check_pose("canonical_pose", *m.canonical_pose);
    }

    // Layers.
    const json& jl = j.value("layers", json());
    if (!jl.is_array() || jl.empty()) {
        issues.push_back({"layers", "needs at least one layer"});
    } else {
        std::set<std::string> names;
        for (std::size_t k = 0; k < jl.size(); ++k) {
            const std::string w = "layers[" + std::to_string(k) + "]";
            const json& e = jl[k];
            if (!e.is_object()) {
                issues.push_back({w, "expected an object"});
                continue;
            }
            r.only(e, w, {"name", "mesh", "pose", "labels", "garment_label", "reference"});
            LayerEntry layer;
            layer.name = r.string(e, w, "name", false).value_or("layer" + std::to_string(k + 1));
            if (layer.name.empty() || layer.name.find_first_of("/\\") != std::string::npos || !names.insert(layer.name).second) {
                issues.push_back({w + ".name", "must be a unique, non-empty file-name-safe string"});
            }
            r.optional(e, w, "garment_label", layer.garment_label);
            std::optional<TriMesh> mesh;
            if (auto s = r.string(e, w, "mesh", true)) {
                layer.mesh = resolve(*s);
                if (existing(w + ".mesh", layer.mesh)) attempt(w + ".mesh", [&] { mesh = load_mesh(layer.mesh); });
            }
            if (auto s = r.string(e, w, "pose", true)) {
                layer.pose = resolve(*s);
                check_pose(w + ".pose", layer.pose);
            }
            const json& lab = e.value("labels", json{{"source", "vertex"}});
            const std::string lw = w + ".labels";
            r.only(lab, lw, {"source", "file", "views"});
            const std::string source = r.string(lab, lw, "source", true).value_or("vertex");
            if (source == "vertex") {
                std::optional<std::vector<int>> labels;
                if (auto s = r.string(lab, lw, "file", false)) {
                    layer.label_file = resolve(*s);
                    if (existing(lw + ".file", *layer.label_file)) attempt(lw + ".file", [&] { labels = load_labels(*layer.label_file); });
                } else if (mesh) {
                    if (mesh->labels) labels = *mesh->labels;
                    else issues.push_back({lw, "no label file given and the mesh carries no labels"});
                }
                if (labels && mesh) {
                    if (labels->size() != mesh->vertices.size()) {
                        issues.push_back({lw, "dimension mismatch: " + std::to_string(labels->size()) + " labels for " +
                                                  std::to_string(mesh->vertices.size()) + " vertices"});
                    } else if (std::find(labels->begin(), labels->end(), layer.garment_label) == labels->end()) {
                        issues.push_back({w + ".garment_label", "label " + std::to_string(layer.garment_label) + " does not occur"});
                    }
                }
            } else if (source == "masks") {
                layer.labels_from_masks = true;
                const json& views = lab.value("views", json());
                if (!views.is_array() || views.empty()) issues.push_back({lw + ".views", "needs at least one view"});
                else {
                    for (std::size_t v = 0; v < views.size(); ++v) {
                        const std::string vw = lw + ".views[" + std::to_string(v) + "]";
                        r.only(views[v], vw, {"mask", "camera"});
                        auto ms = r.string(views[v], vw, "mask", true), cs = r.string(views[v], vw, "camera", true);
                        if (!ms || !cs) continue;
                        MaskView mv{resolve(*ms), resolve(*cs)};
                        LabelMask mask;
                        Camera cam;
                        const bool mask_ok = existing(vw + ".mask", mv.mask) && attempt(vw + ".mask", [&] { mask = load_mask(mv.mask); });
                        const bool cam_ok = existing(vw + ".camera", mv.camera) && attempt(vw + ".camera", [&] { cam = load_camera(mv.camera); });
                        if (mask_ok && cam_ok && (mask.width != cam.width || mask.height != cam.height)) {
                            issues.push_back({vw, "mask size does not match the camera resolution"});
                        }
                        layer.views.push_back(mv);
                    }
                }
            } else {
                issues.push_back({lw + ".source", "expected \"vertex\" or \"masks\""});
            }
            if (auto s = r.string(e, w, "reference", false)) {
                layer.reference = resolve(*s);
                if (existing(w + ".reference", *layer.reference)) attempt(w + ".reference", [&] { load_mesh(*layer.reference); });
            }
            m.layers.push_back(std::move(layer));
        }
    }
    if (issues.empty()) check.manifest = std::move(m);
    return check;
}

Manifest load_manifest(const fs::path& path) {
    ManifestCheck c = validate_manifest(path);
    if (!c.ok()) {
        std::string msg = path.string() + ": invalid manifest";
        for (const auto& i : c.issues) msg += "\n  " + (i.location.empty() ? std::string("(top)") : i.location) + ": " + i.message;
        throw Error(ErrorKind::InvalidInput, msg);
    }
    return std::move(*c.manifest);
}

void save_manifest(const fs::path& path, const Manifest& m) {
    const fs::path base = fs::absolute(path).parent_path();
    json j;
    j["version"] = kManifestVersion;
    j["body"] = {{"mesh", rel(m.body_mesh, base)}, {"weights", rel(m.body_weights, base)}};
    if (m.body_joints) j["body"]["joints"] = rel(*m.body_joints, base);
    if (m.canonical_pose) j["canonical_pose"] = rel(*m.canonical_pose, base);
    j["layers"] = json::array();
    for (const auto& l : m.layers) {
        json e{{"name", l.name}, {"mesh", rel(l.mesh, base)}, {"pose", rel(l.pose, base)}, {"garment_label", l.garment_label}};
        if (l.labels_from_masks) {
            json views = json::array();
            for (const auto& v : l.views) views.push_back({{"mask", rel(v.mask, base)}, {"camera", rel(v.camera, base)}});
            e["labels"] = {{"source", "masks"}, {"views", views}};
        } else {
            e["labels"] = {{"source", "vertex"}};
            if (l.label_file) e["labels"]["file"] = rel(*l.label_file, base);
        }
        if (l.reference) e["reference"] = rel(*l.reference, base);
        j["layers"].push_back(e);
    }
    j["parameters"] = params_to_json(m.params);
    j["output"] = rel(m.output, base);
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

// ---------------------------------------------------------------- run

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = seed ^ (0x9E3779B97F4A7C15ull * (a + 1)) ^ (0xC2B2AE3D27D4EB4Full * (b + 1));
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

enum SeedPurpose : std::uint64_t { kSampling = 1, kInit = 2, kShuffle = 3 };

json record_to_json(const RunRecord& r) {
    json j;
    j["tool_version"] = r.tool_version;
    j["parameters"] = params_to_json(r.params);
    j["stages"] = json::array();
    for (const auto& s : r.stages) j["stages"].push_back({{"name", s.name}, {"seconds", s.seconds}, {"outputs", s.outputs}});
    j["warnings"] = r.warnings;
    j["failure"] = r.failure;
    return j;
}

class Runner {
public:
    Runner(const Manifest& m, const RunOptions& opt)
        : m_(m), params_(m.params), out_(opt.output.value_or(m.output)) {
        if (opt.seed) params_.seed = *opt.seed;
    }

    RunRecord run(const StageRange& range) {
        load_previous_record();
        record_.params = params_;
        record_.tool_version = kToolVersion;
        record_.failure.clear();
        fs::create_directories(out_);
        try {
            for (int s = static_cast<int>(range.first); s <= static_cast<int>(range.last); ++s) run_stage(static_cast<Stage>(s));
        } catch (const StageError& e) {
            record_.failure = e.what();
            write_record();
            throw;
        }
        write_record();
        return record_;
    }

private:
    const Manifest& m_;
    PipelineParameters params_;
    fs::path out_;
    RunRecord record_;
    std::vector<std::string> outputs_;
    int layer_ = 0;  // 1-based layer being processed, for error messages

    fs::path at(const fs::path& p) const { return out_ / p; }

    void produced(const fs::path& p) { outputs_.push_back(p.generic_string()); }

    void save(const fs::path& relpath, const TriMesh& mesh) {
        fs::create_directories(at(relpath).parent_path());
        save_mesh(at(relpath), mesh);
        produced(relpath);
    }

    void load_previous_record() {
        std::ifstream in(at(artifacts::run_record()));
        if (!in) return;
        try {
            const json j = json::parse(in);
            for (const auto& s : j.at("stages")) {
                record_.stages.push_back({s.at("name").get<std::string>(), s.at("seconds").get<double>(),
                                          s.at("outputs").get<std::vector<std::string>>()});
            }
        } catch (const json::exception&) {
            record_.stages.clear();  // unreadable record: start fresh
        }
    }

    void write_record() {
        // Keep stage entries in pipeline order.
        std::stable_sort(record_.stages.begin(), record_.stages.end(), [](const StageRecord& a, const StageRecord& b) {
            return static_cast<int>(StageRange::parse(a.name).first) < static_cast<int>(StageRange::parse(b.name).first);
        });
        std::ofstream out(at(artifacts::run_record()));
        if (!out) throw StageError(Stage::Metrics, 0, Error(ErrorKind::Io, "cannot write " + at(artifacts::run_record()).string()));
        out << record_to_json(record_).dump(2) << '\n';
    }

    void run_stage(Stage s) {
        outputs_.clear();
        layer_ = 0;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            switch (s) {
                case Stage::Labels: labels(); break;
                case Stage::Canonicalize: canonicalize(); break;
                case Stage::Penetration: penetration(); break;
                case Stage::Udf: udf(); break;
                case Stage::Extract: extract(); break;
                case Stage::Metrics: metrics(); break;
            }
        } catch (const Error& e) {
            throw StageError(s, layer_, e);
        } catch (const fs::filesystem_error& e) {
            throw StageError(s, layer_, Error(ErrorKind::Io, e.what()));
        }
        StageRecord rec{stage_name(s), std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), outputs_};
        std::erase_if(record_.stages, [&](const StageRecord& r) { return r.name == rec.name; });
        record_.stages.push_back(rec);
    }

    int garment_label(std::size_t k) const { return m_.layers[k].garment_label; }

    SkinnedBody load_body() const {
        SkinnedBody body;
        body.mesh = load_mesh(m_.body_mesh);
        body.weights = load_weights(m_.body_weights);
        if (m_.body_joints) body.joints = load_joints(*m_.body_joints);
        body.validate();
        return body;
    }

    // Joint centers in the canonical pose.
    std::vector<Vec3> canonical_joints() const {
        const SkinnedBody body = load_body();
        auto joints = body.rest_joint_positions();
        if (m_.canonical_pose) {
            const Pose pose = load_pose(*m_.canonical_pose);
            for (std::size_t i = 0; i < joints.size(); ++i) joints[i] = (pose.bones[i] * joints[i].homogeneous()).head<3>();
        }
        return joints;
    }

    TriMesh load_stage_mesh(const fs::path& relpath) const {
        if (!fs::exists(at(relpath))) {
            throw Error(ErrorKind::Io, "missing artifact " + at(relpath).string() + " (run the earlier stages first)");
        }
        return load_mesh(at(relpath));
    }

    // (1) labels: pass through per-vertex labels or vote over masks.
    void labels() {
        for (std::size_t k = 0; k < m_.layers.size(); ++k) {
            layer_ = static_cast<int>(k + 1);
            const LayerEntry& e = m_.layers[k];
            const TriMesh mesh = load_mesh(e.mesh);
            std::vector<int> labels;
            if (e.labels_from_masks) {
                std::vector<LabeledView> views;
                for (const auto& v : e.views) views.push_back({load_camera(v.camera), load_mask(v.mask)});
                VoteConfig cfg;
                cfg.garment_label = e.garment_label;
                cfg.visibility_tolerance = params_.visibility_tolerance;
                labels = refine_labels(mesh, vote_vertex_labels(mesh, views, cfg), params_.smoothing_iterations);
            } else if (e.label_file) {
                labels = load_labels(*e.label_file);
            } else if (mesh.labels) {
                labels = *mesh.labels;
            } else {
                throw Error(ErrorKind::InvalidInput, "layer mesh has no labels");
            }
            if (labels.size() != mesh.vertices.size()) throw Error(ErrorKind::InvalidInput, "label count does not match the mesh");
            fs::create_directories(at(artifacts::labels(e.name)).parent_path());
            save_labels(at(artifacts::labels(e.name)), labels);
            produced(artifacts::labels(e.name));
        }
    }

    // (2) canonicalize: inverse skinning to the rest pose, then the optional
    // canonical pose.
    void canonicalize() {
        const SkinnedBody body = load_body();
        std::optional<Pose> canonical;
        if (m_.canonical_pose) canonical = load_pose(*m_.canonical_pose);
        save(artifacts::canonical_body(), canonical ? pose_body(body, *canonical) : body.mesh);
        for (std::size_t k = 0; k < m_.layers.size(); ++k) {
            layer_ = static_cast<int>(k + 1);
            const LayerEntry& e = m_.layers[k];
            TriMesh mesh = load_mesh(e.mesh);
            if (!fs::exists(at(artifacts::labels(e.name)))) throw Error(ErrorKind::Io, "missing labels artifact; run the labels stage");
            mesh.labels = load_labels(at(artifacts::labels(e.name)));
            TriMesh rest = canonicalize_layer(mesh, body, load_pose(e.pose));
            if (canonical) rest.vertices = lbs_forward(rest.vertices, transfer_weights(body, rest), *canonical);
            save(artifacts::canonical(e.name), rest);
        }
    }

    // (3) penetration removal over the whole stack.
    void penetration() {
        LayerStack stack;
        stack.body = load_stage_mesh(artifacts::canonical_body());
        stack.epsilon = params_.epsilon;
        for (std::size_t k = 0; k < m_.layers.size(); ++k) {
            TriMesh mesh = load_stage_mesh(artifacts::canonical(m_.layers[k].name));
            auto s = garment_set_from_labels(mesh, garment_label(k));
            stack.layers.push_back({std::move(mesh), std::move(s)});
        }
        const PenetrationResult res = remove_penetrations(stack);
        for (std::size_t k = 0; k < res.layers.size(); ++k) {
            layer_ = static_cast<int>(k + 1);
            save(artifacts::layered(m_.layers[k].name), res.layers[k]);
        }
        for (const auto& w : res.warnings) record_.warnings.push_back("penetration: " + w);
    }

    // (4) one UDF per layer, fit to M'_k restricted to S_k.
    void udf() {
        for (std::size_t k = 0; k < m_.layers.size(); ++k) {
            layer_ = static_cast<int>(k + 1);
            const LayerEntry& e = m_.layers[k];
            const TriMesh mesh = load_stage_mesh(artifacts::layered(e.name));
            const auto s = garment_set_from_labels(mesh, garment_label(k));
            const SampleSet samples =
                sample_training_points(mesh, s, params_.samples, params_.sigma, derive_seed(params_.seed, k, kSampling));
            MlpUdf model = MlpUdf::create(params_.pe_count, params_.hidden, params_.delta, derive_seed(params_.seed, k, kInit));
            TrainConfig cfg = params_.train;
            cfg.seed = derive_seed(params_.seed, k, kShuffle);
            const auto history = train_udf(model, samples, cfg);
            fs::create_directories(at(artifacts::checkpoint(e.name)).parent_path());
            save_checkpoint(at(artifacts::checkpoint(e.name)), model);
            produced(artifacts::checkpoint(e.name));
            save_loss_history(at(artifacts::loss_history(e.name)), history);
            produced(artifacts::loss_history(e.name));
        }
    }

    // (5) bake, marching cubes at tau, back-face orientation.
    void extract() {
        const auto joints = canonical_joints();
        for (std::size_t k = 0; k < m_.layers.size(); ++k) {
            layer_ = static_cast<int>(k + 1);
            const LayerEntry& e = m_.layers[k];
            if (!fs::exists(at(artifacts::checkpoint(e.name)))) throw Error(ErrorKind::Io, "missing checkpoint; run the udf stage");
            // Always from the saved checkpoint, so resumed and uninterrupted
            // runs extract from the same float32 weights.
            const MlpUdf model = load_checkpoint(at(artifacts::checkpoint(e.name)));
            const TriMesh layered_mesh = load_stage_mesh(artifacts::layered(e.name));
            std::vector<bool> in_s(layered_mesh.vertices.size(), false);
            for (auto v : garment_set_from_labels(layered_mesh, garment_label(k))) in_s[v] = true;
            const TriMesh garment_part = extract_submesh(layered_mesh, in_s);
            const Aabb bounds = extraction_bounds(garment_part, params_.grid_resolution, params_.tau);
            const IsoSurface iso = marching_cubes(bake_grid(model, bounds, params_.grid_resolution), params_.tau);
            if (iso.empty) record_.warnings.push_back("extract: layer " + e.name + " has an empty level set");
            save(artifacts::garment(e.name), orient_back_faces(iso.mesh, joints, params_.view_dir, params_.xi));
        }
    }

    // (6) metrics of the extracted garments.
    void metrics() {
        const TriMesh body = load_stage_mesh(artifacts::canonical_body());
        std::vector<TriMesh> garments, references(m_.layers.size());
        for (std::size_t k = 0; k < m_.layers.size(); ++k) {
            layer_ = static_cast<int>(k + 1);
            garments.push_back(load_stage_mesh(artifacts::garment(m_.layers[k].name)));
            if (m_.layers[k].reference) references[k] = load_mesh(*m_.layers[k].reference);
        }
        layer_ = 0;
        std::vector<LayerInput> inputs;
        for (std::size_t k = 0; k < m_.layers.size(); ++k) {
            const bool usable = !garments[k].empty();
            if (!usable) record_.warnings.push_back("metrics: layer " + m_.layers[k].name + " is empty; CD and NC skipped");
            inputs.push_back({m_.layers[k].name, &garments[k], usable && m_.layers[k].reference ? &references[k] : nullptr});
        }
        MetricConfig cfg = params_.metrics;
        cfg.seed = params_.seed;
        save_metric_report(at(artifacts::metrics()), evaluate_layers(body, inputs, cfg));
        produced(artifacts::metrics());
    }
};

}  // namespace

RunRecord run_pipeline(const Manifest& manifest, const RunOptions& options) {
    if (manifest.layers.empty()) throw Error(ErrorKind::InvalidInput, "manifest has no layers");
    Runner runner(manifest, options);
    return runner.run(options.stages);
}

std::string run_record_json(const RunRecord& record) { return record_to_json(record).dump(2); }

// ---------------------------------------------------------------- fixture

Manifest write_synthetic_fixture(const FixtureSpec& spec, const SynthOptions& options, const fs::path& dir) {
    spec.validate();
    fs::create_directories(dir);
    const SkinnedBody body = make_body(spec);
    Manifest m;
    m.params = options.params;
    m.output = dir / "out";
    m.body_mesh = dir / "body.ply";
    m.body_weights = dir / "body.weights";
    m.body_joints = dir / "joints.json";
    save_mesh(m.body_mesh, body.mesh);
    save_weights(m.body_weights, body.weights);
    save_joints(*m.body_joints, body.joints);

    FixtureSpec clean = spec;
    for (auto& l : clean.layers) l.penetration_fraction = 0.0;
    for (std::size_t k = 0; k < spec.layers.size(); ++k) {
        LayerEntry e;
        e.name = "layer" + std::to_string(k + 1);
        const TriMesh rest = make_garment_layer(spec, k);
        const Pose pose = perturb_pose(body, options.pose_magnitude, derive_seed(spec.seed, k, 7));
        TriMesh posed = rest;
        posed.vertices = lbs_forward(rest.vertices, transfer_weights(body, rest), pose);
        e.mesh = dir / (e.name + ".ply");
        e.pose = dir / (e.name + "_pose.json");
        save_mesh(e.mesh, posed);
        save_pose(e.pose, pose);

        // Ground truth: the garment region of the layer without seeded
        // penetrations, in the canonical pose.
        const TriMesh truth = make_garment_layer(clean, k);
        std::vector<bool> in_s(truth.vertices.size(), false);
        for (auto v : garment_set_from_labels(truth)) in_s[v] = true;
        TriMesh reference = extract_submesh(truth, in_s);
        reference.labels.reset();
        e.reference = dir / (e.name + "_reference.ply");
        save_mesh(*e.reference, reference);

        if (options.masks) {
            // Masks mark pixels whose visible point is nearest a garment
            // vertex of the posed layer.
            e.labels_from_masks = true;
            const Aabb box = posed.bounds();
            const Vec3 center = (box.min + box.max) / 2.0;
            const double radius = 2.5 * (box.max - box.min).norm();
            const auto cams = sample_turntable_views(center, radius, options.mask_resolution, options.mask_resolution);
            const PointIndex nearest(posed.vertices);
            const auto& labels = *posed.labels;
            const auto views = region_masks(posed, cams, [&](const Vec3& p) { return labels[nearest.nearest(p)] == 1; });
            fs::create_directories(dir / "masks");
            for (std::size_t v = 0; v < views.size(); ++v) {
                char tag[16];
                std::snprintf(tag, sizeof tag, "%02zu", v);
                MaskView mv{dir / "masks" / (e.name + "_" + tag + ".png"), dir / "masks" / (e.name + "_" + tag + ".json")};
                save_mask(mv.mask, views[v].mask);
                save_camera(mv.camera, views[v].camera);
                e.views.push_back(mv);
            }
        }
        m.layers.push_back(std::move(e));
    }
    save_manifest(dir / "manifest.json", m);
    return m;
}

}  // namespace layered
