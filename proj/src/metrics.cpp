// Copyright 2026 The layered-garments Authors
// SPDX-License-Identifier: Apache-2.0
#include "layered/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "json.hpp"
#include "layered/error.hpp"
#include "layered/parallel.hpp"
#include "layered/spatial_index.hpp"

namespace layered {

using json = nlohmann::json;

namespace {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1p-53; }

// Mean over the samples of f(sample index), accumulated in index order.
template <class F>
double ordered_mean(std::size_t n, F&& f) {
    std::vector<double> v(n);
    parallel_for(n, [&](std::size_t i) { v[i] = f(i); });
    double sum = 0.0;
    for (double x : v) sum += x;
    return sum / static_cast<double>(n);
}

double directed_distance(const SurfaceSamples& from, const SpatialIndex& to) {
    return ordered_mean(from.points.size(), [&](std::size_t i) { return to.unsigned_distance(from.points[i]); });
}

double directed_cosine(const SurfaceSamples& from, const SpatialIndex& to) {
    return ordered_mean(from.points.size(), [&](std::size_t i) {
        const auto hit = to.closest_point(from.points[i]);
        return std::abs(from.normals[i].dot(face_normal(to.mesh(), hit.face)));
    });
}

void require_samples(std::size_t samples) {
    if (samples == 0) throw Error(ErrorKind::InvalidInput, "sample count must be positive");
}

}  // namespace

SurfaceSamples sample_surface(const TriMesh& mesh, std::size_t count, std::uint64_t seed) {
    std::vector<double> cumulative;
    std::vector<std::uint32_t> faces;
    double total = 0.0;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const double a = mesh.face_area(f);
        if (!(a > 0.0) || !std::isfinite(a)) continue;
        total += a;
        cumulative.push_back(total);
        faces.push_back(static_cast<std::uint32_t>(f));
    }
    if (faces.empty()) throw Error(ErrorKind::InvalidInput, "mesh has no faces with positive area");
    std::mt19937_64 rng(seed);
    SurfaceSamples out;
    out.points.reserve(count);
    out.normals.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double r = uniform01(rng) * total;
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
        if (it == cumulative.end()) --it;
        const std::uint32_t f = faces[static_cast<std::size_t>(it - cumulative.begin())];
        const Face& t = mesh.faces[f];
        const double s = std::sqrt(uniform01(rng)), u = uniform01(rng);
        out.points.push_back((1 - s) * mesh.vertices[t[0]] + s * (1 - u) * mesh.vertices[t[1]] + s * u * mesh.vertices[t[2]]);
        out.normals.push_back(face_normal(mesh, f));
    }
    return out;
}

double chamfer_distance(const TriMesh& a, const TriMesh& b, std::size_t samples, std::uint64_t seed) {
    require_samples(samples);
    if (a.empty() || b.empty()) throw Error(ErrorKind::InvalidInput, "chamfer distance needs two non-empty meshes");
    const SurfaceSamples sa = sample_surface(a, samples, seed), sb = sample_surface(b, samples, seed);
    const SpatialIndex ia(a), ib(b);
    const double ab = directed_distance(sa, ib), ba = directed_distance(sb, ia);
    return 1000.0 * (ab + ba) / 2.0;
}

double normal_consistency(const TriMesh& a, const TriMesh& b, std::size_t samples, std::uint64_t seed) {
    require_samples(samples);
    if (a.empty() || b.empty()) throw Error(ErrorKind::InvalidInput, "normal consistency needs two non-empty meshes");
    const SurfaceSamples sa = sample_surface(a, samples, seed), sb = sample_surface(b, samples, seed);
    const SpatialIndex ia(a), ib(b);
    const double ab = directed_cosine(sa, ib), ba = directed_cosine(sb, ia);
    return (ab + ba) / 2.0;
}

std::vector<Camera> ir_cameras(std::span<const TriMesh* const> scene, int resolution) {
    if (resolution < 1) throw Error(ErrorKind::InvalidInput, "render resolution must be positive");
    Aabb box;
    for (const TriMesh* m : scene) box.extend(m->bounds());
    if (!std::isfinite(box.min.x())) throw Error(ErrorKind::InvalidInput, "scene has no vertices");
    const Vec3 center = (box.min + box.max) / 2.0, size = box.max - box.min;
    const double extent = std::max({size.x(), size.y(), 1e-9}) * 1.05;
    const double back_off = size.z() + 1.0;
    std::vector<Camera> views;
    for (double side : {1.0, -1.0}) {
        Camera cam = Camera::look_at(Projection::Orthographic, center + side * back_off * Vec3::UnitZ(), center, Vec3::UnitY(),
                                     resolution, resolution);
        cam.extent = extent;
        views.push_back(cam);
    }
    return views;
}

IntersectionRatio intersection_ratio(const TriMesh& outer, std::span<const TriMesh* const> inner,
                                     std::span<const Camera> views) {
    std::vector<const TriMesh*> scene{&outer};
    scene.insert(scene.end(), inner.begin(), inner.end());
    IntersectionRatio ir;
    for (const Camera& cam : views) {
        ir.visible_alone += render_buffers(outer, cam).covered_pixels();
        // Outer first: it holds the lowest face ids and so wins exact ties.
        const RenderBuffers all = render_buffers(scene, cam);
        for (std::uint32_t id : all.face_id) ir.visible_in_scene += id != kBackground && all.mesh_of(id) == 0;
    }
    if (ir.visible_alone == 0) throw Error(ErrorKind::UndefinedMetric, "outer garment covers no pixels in any view");
    ir.percent = 100.0 * static_cast<double>(ir.visible_alone - ir.visible_in_scene) / static_cast<double>(ir.visible_alone);
    return ir;
}

IntersectionRatio intersection_ratio(const TriMesh& outer, std::span<const TriMesh* const> inner, int resolution) {
    std::vector<const TriMesh*> scene{&outer};
    scene.insert(scene.end(), inner.begin(), inner.end());
    const auto views = ir_cameras(scene, resolution);
    return intersection_ratio(outer, inner, views);
}

void MetricConfig::validate() const {
    if (samples == 0) throw Error(ErrorKind::InvalidInput, "metric sample count must be positive");
    if (resolution < 1) throw Error(ErrorKind::InvalidInput, "metric render resolution must be positive");
}

MetricReport evaluate_layers(const TriMesh& body, std::span<const LayerInput> layers, const MetricConfig& config) {
    config.validate();
    MetricReport report;
    report.config = config;
    std::vector<const TriMesh*> inner{&body};
    double cd = 0.0, nc = 0.0, ir = 0.0;
    int with_ref = 0, with_ir = 0;
    for (const LayerInput& in : layers) {
        if (!in.mesh) throw Error(ErrorKind::InvalidInput, "layer '" + in.name + "' has no mesh");
        LayerMetrics lm;
        lm.name = in.name;
        if (in.reference) {
            lm.chamfer_mm = chamfer_distance(*in.mesh, *in.reference, config.samples, config.seed);
            lm.normal_consistency = normal_consistency(*in.mesh, *in.reference, config.samples, config.seed);
            cd += *lm.chamfer_mm;
            nc += *lm.normal_consistency;
            ++with_ref;
        }
        if (!in.mesh->empty()) {
            try {
                const auto r = intersection_ratio(*in.mesh, inner, config.resolution);
                lm.intersection_ratio_percent = r.percent;
                lm.visible_alone = r.visible_alone;
                lm.visible_in_scene = r.visible_in_scene;
                ir += r.percent;
                ++with_ir;
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::UndefinedMetric) throw;
            }
        }
        report.layers.push_back(lm);
        inner.push_back(in.mesh);
    }
    if (with_ref) {
        report.chamfer_mm = cd / with_ref;
        report.normal_consistency = nc / with_ref;
    }
    if (with_ir) report.intersection_ratio_percent = ir / with_ir;
    return report;
}

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

std::string metric_report_json(const MetricReport& report) {
    json j;
    j["chamfer_mm"] = optional_number(report.chamfer_mm);
    j["normal_consistency"] = optional_number(report.normal_consistency);
    j["intersection_ratio_percent"] = optional_number(report.intersection_ratio_percent);
    j["samples"] = report.config.samples;
    j["resolution"] = report.config.resolution;
    j["seed"] = report.config.seed;
    j["layers"] = json::array();
    for (const auto& l : report.layers) {
        j["layers"].push_back({{"name", l.name},
                               {"chamfer_mm", optional_number(l.chamfer_mm)},
                               {"normal_consistency", optional_number(l.normal_consistency)},
                               {"intersection_ratio_percent", optional_number(l.intersection_ratio_percent)},
                               {"visible_alone", l.visible_alone},
                               {"visible_in_scene", l.visible_in_scene}});
    }
    return j.dump(2);
}

void save_metric_report(const std::filesystem::path& path, const MetricReport& report) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    out << metric_report_json(report) << '\n';
    if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

}  // namespace layered
